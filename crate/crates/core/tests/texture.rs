mod common;

use common::{random_batch, random_hit, random_image, rel_err};
use illusion_core::geometry::{build_uv_query_map, cube_corner_views, SceneSpec, SurfaceHit, UVQueryMap};
use illusion_core::raster::Image;
use illusion_core::texture::{
    backward, encode, eval_map, AnyTexture, HashGridConfig, HashGridField, MlpConfig, PlainGrid, Reduction,
    TextureModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_grid() -> HashGridConfig {
    HashGridConfig { levels: 5, features_per_level: 2, base_resolution: 4, growth_factor: 1.6, table_size_log2: 9 }
}

fn random_field(seed: u64) -> HashGridField<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = HashGridField::new(small_grid(), MlpConfig { hidden_layers: 2, hidden_width: 16 }, &mut rng).unwrap();
    let n = f.grid.num_table_params();
    for v in &mut f.params[..n] {
        *v = rng.random_range(-1.0..1.0);
    }
    f
}

/// Bilinear interpolation of one level written out longhand.
fn oracle_level(cfg: &HashGridConfig, tables: &[f64], level: u32, surface: u32, uv: [f64; 2]) -> Vec<f64> {
    let f = cfg.features_per_level as usize;
    let res = cfg.level_resolution(level);
    let base = level as usize * cfg.table_size() * f;
    let px = uv[0].clamp(0.0, 1.0) * res as f64;
    let py = uv[1].clamp(0.0, 1.0) * res as f64;
    let x0 = (px.floor() as u32).min(res - 1);
    let y0 = (py.floor() as u32).min(res - 1);
    let (tx, ty) = (px - x0 as f64, py - y0 as f64);
    let entry = |x: u32, y: u32| {
        let i = cfg.vertex_index(res, surface, x, y);
        &tables[base + i * f..base + (i + 1) * f]
    };
    (0..f)
        .map(|c| {
            let bottom = entry(x0, y0)[c] * (1.0 - tx) + entry(x0 + 1, y0)[c] * tx;
            let top = entry(x0, y0 + 1)[c] * (1.0 - tx) + entry(x0 + 1, y0 + 1)[c] * tx;
            bottom * (1.0 - ty) + top * ty
        })
        .collect()
}

#[test]
fn encoding_matches_longhand_bilinear() {
    let field = random_field(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let hit: SurfaceHit<f64> = random_hit(&mut rng, 6);
        let got = encode(&field.grid, field.tables(), hit.surface_id, hit.uv);
        let want: Vec<f64> =
            (0..field.grid.levels).flat_map(|l| oracle_level(&field.grid, field.tables(), l, hit.surface_id, hit.uv)).collect();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6);
        }
    }
}

#[test]
fn zero_tables_encode_to_zero() {
    let field = HashGridField::<f64>::zeroed(small_grid(), MlpConfig::default()).unwrap();
    assert!(encode(&field.grid, field.tables(), 3, [0.3, 0.8]).iter().all(|v| *v == 0.0));
}

proptest! {
    #[test]
    fn weights_partition_unity(level in 0u32..5, u in 0.0..1.0f64, v in 0.0..1.0f64, s in 0u32..6) {
        let total: f64 = small_grid().level_taps(level, s, [u, v]).iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hash_grid_output_stays_in_unit_range(seed in any::<u64>(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let mut f = random_field(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let off = f.grid.num_table_params();
        for p in &mut f.params[off..] {
            *p = rng.random_range(-3.0..3.0);
        }
        let hit = SurfaceHit { uv: [u, v], ..random_hit(&mut rng, 6) };
        prop_assert!(f.eval(&hit).iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn eval_map_matches_per_pixel_loop() {
    let field = random_field(3);
    let scene = SceneSpec::<f64>::cube(1.0);
    let view = &cube_corner_views(1.0, 3).unwrap()[0];
    let map = build_uv_query_map(&scene, &view.base_camera, 48, 48);
    let img = eval_map(&field, &map, [0.9, 0.1, 0.2]);
    for y in 0..48 {
        for x in 0..48 {
            let want = map.get(x, y).map_or([0.9, 0.1, 0.2], |h| field.eval(h));
            assert_eq!(img.get(x, y), want);
        }
    }
    let all_miss = UVQueryMap::<f64> { width: 3, height: 2, entries: vec![None; 6] };
    assert_eq!(eval_map(&field, &all_miss, [0.1, 0.2, 0.3]), Image::filled(3, 2, [0.1, 0.2, 0.3]));
}

#[test]
fn backward_is_linear_and_zero_for_zero_upstream() {
    let field = random_field(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let map = random_batch::<f64, _>(&mut rng, 64, 6);
    let up: Image<f64> = random_image(&mut rng, 64, 1, -1.0, 1.0);
    let g1 = backward(&field, &map, &up, Reduction::Deterministic).unwrap().values;
    let g2 = backward(&field, &map, &up.scaled(2.0), Reduction::Deterministic).unwrap().values;
    for (a, b) in g1.iter().zip(&g2) {
        assert!((2.0 * a - b).abs() <= 1e-6 * b.abs().max(1e-12));
    }
    let zero = backward(&field, &map, &Image::zeros(64, 1), Reduction::Deterministic).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));
}

#[test]
fn deterministic_reduction_is_bit_reproducible() {
    let field = random_field(6).cast::<f32>();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let map = random_batch::<f32, _>(&mut rng, 512, 6);
    let up: Image<f32> = random_image(&mut rng, 512, 1, -1.0, 1.0);
    let a = backward(&field, &map, &up, Reduction::Deterministic).unwrap();
    let b = backward(&field, &map, &up, Reduction::Deterministic).unwrap();
    assert_eq!(a.values, b.values);
    let p = backward(&field, &map, &up, Reduction::Parallel).unwrap();
    for (x, y) in a.values.iter().zip(&p.values) {
        assert!(rel_err(f64::from(*x), f64::from(*y)) < 1e-4 || (x - y).abs() < 1e-6);
    }
}

#[test]
fn plain_grid_one_pixel_gradient_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = PlainGrid::<f64>::filled(2, 7, [0.4; 3]).unwrap();
    for _ in 0..100 {
        let hit: SurfaceHit<f64> = random_hit(&mut rng, 2);
        let map = UVQueryMap { width: 1, height: 1, entries: vec![Some(hit)] };
        let up = Image::filled(1, 1, [1.0, 0.0, 0.0]);
        let g = backward(&grid, &map, &up, Reduction::Deterministic).unwrap().values;
        let red: f64 = g.iter().step_by(3).sum();
        assert!((red - 1.0).abs() < 1e-12);
        assert!(g.iter().skip(1).step_by(3).all(|v| *v == 0.0));
    }
}

#[test]
fn plain_grid_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut grid = PlainGrid::<f64>::filled(3, 6, [0.0; 3]).unwrap();
    for v in &mut grid.params {
        *v = rng.random();
    }
    let map = random_batch::<f64, _>(&mut rng, 64, 3);
    let up: Image<f64> = random_image(&mut rng, 64, 1, -1.0, 1.0);
    let g = backward(&grid, &map, &up, Reduction::Deterministic).unwrap().values;
    let eps = 1e-3;
    for _ in 0..100 {
        let i = rng.random_range(0..g.len());
        let mut plus = grid.clone();
        plus.params[i] += eps;
        let mut minus = grid.clone();
        minus.params[i] -= eps;
        let fd = (eval_map(&plus, &map, [0.0; 3]).dot(&up) - eval_map(&minus, &map, [0.0; 3]).dot(&up)) / (2.0 * eps);
        assert!(rel_err(g[i], fd) < 1e-6 || (g[i] - fd).abs() < 1e-12, "param {i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn checkpoints_round_trip_both_representations() {
    let dir = tempfile::tempdir().unwrap();
    let hash = AnyTexture::from(random_field(10).cast::<f32>());
    let path = dir.path().join("h.bin");
    hash.save(&path).unwrap();
    assert_eq!(AnyTexture::<f32>::load(&path).unwrap(), hash);
    let plain = AnyTexture::from(PlainGrid::<f64>::filled(6, 5, [0.25, 0.5, 0.75]).unwrap());
    let path = dir.path().join("p.bin");
    plain.save(&path).unwrap();
    assert_eq!(AnyTexture::<f64>::load(&path).unwrap(), plain);
}
