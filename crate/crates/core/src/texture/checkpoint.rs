//! Binary texture checkpoints.
//!
//! Hash-grid field:
//!
//! ```text
//! "MVITEX1\0"
//! u32 levels, u32 features_per_level, u32 base_resolution, f32 growth_factor,
//! u32 table_size_log2, u32 hidden_layers, u32 hidden_width
//! f32 params[...]            (tables, then MLP layers)
//! ```
//!
//! Plain grid:
//!
//! ```text
//! "MVIGRD1\0"
//! u32 surfaces, u32 resolution
//! f32 texels[surfaces][resolution][resolution][3]
//! ```
//!
//! All numbers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::hash_grid::{HashGridConfig, HashGridField, HashGridScratch};
use super::mlp::MlpConfig;
use super::plain_grid::PlainGrid;
use super::{TextureError, TextureModel};
use crate::geometry::SurfaceHit;
use crate::scalar::{self, Scalar};

pub const HASH_GRID_MAGIC: &[u8; 8] = b"MVITEX1\0";
pub const PLAIN_GRID_MAGIC: &[u8; 8] = b"MVIGRD1\0";

/// Either texture representation, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyTexture<S> {
    HashGrid(HashGridField<S>),
    PlainGrid(PlainGrid<S>),
}

pub enum AnyScratch<S> {
    HashGrid(HashGridScratch<S>),
    PlainGrid,
}

fn write_params<S: Scalar, W: Write>(w: &mut W, params: &[S]) -> std::io::Result<()> {
    let as_f32: Vec<f32> = params.iter().map(|&v| scalar::cast(v)).collect();
    w.write_all(&scalar::to_le_bytes(&as_f32))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TextureError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| TextureError::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_params<S: Scalar, R: Read>(r: &mut R, expected: usize) -> Result<Vec<S>, TextureError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected * 4 {
        return Err(TextureError::Checkpoint(format!(
            "parameter blob holds {} bytes, header implies {}",
            bytes.len(),
            expected * 4
        )));
    }
    let values: Vec<f32> = scalar::from_le_bytes(&bytes).expect("length checked");
    Ok(values.into_iter().map(scalar::cast).collect())
}

impl<S: Scalar> AnyTexture<S> {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TextureError> {
        match self {
            AnyTexture::HashGrid(f) => {
                w.write_all(HASH_GRID_MAGIC)?;
                for v in [f.grid.levels, f.grid.features_per_level, f.grid.base_resolution] {
                    w.write_all(&v.to_le_bytes())?;
                }
                w.write_all(&f.grid.growth_factor.to_le_bytes())?;
                for v in [f.grid.table_size_log2, f.mlp.hidden_layers, f.mlp.hidden_width] {
                    w.write_all(&v.to_le_bytes())?;
                }
                write_params(&mut w, &f.params)?;
            }
            AnyTexture::PlainGrid(g) => {
                w.write_all(PLAIN_GRID_MAGIC)?;
                w.write_all(&(g.surfaces as u32).to_le_bytes())?;
                w.write_all(&(g.resolution as u32).to_le_bytes())?;
                write_params(&mut w, &g.params)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, TextureError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| TextureError::Checkpoint("file shorter than magic".into()))?;
        if &magic == HASH_GRID_MAGIC {
            let levels = read_u32(&mut r)?;
            let features_per_level = read_u32(&mut r)?;
            let base_resolution = read_u32(&mut r)?;
            let growth_factor = f32::from_bits(read_u32(&mut r)?);
            let table_size_log2 = read_u32(&mut r)?;
            let hidden_layers = read_u32(&mut r)?;
            let hidden_width = read_u32(&mut r)?;
            let grid = HashGridConfig {
                levels,
                features_per_level,
                base_resolution,
                growth_factor,
                table_size_log2,
            };
            grid.validate()
                .map_err(|e| TextureError::Checkpoint(format!("header: {e}")))?;
            let mlp = MlpConfig {
                hidden_layers,
                hidden_width,
            };
            let mut field = HashGridField::zeroed(grid, mlp)?;
            field.params = read_params(&mut r, field.params.len())?;
            Ok(AnyTexture::HashGrid(field))
        } else if &magic == PLAIN_GRID_MAGIC {
            let surfaces = read_u32(&mut r)? as usize;
            let resolution = read_u32(&mut r)? as usize;
            let mut grid = PlainGrid::filled(surfaces, resolution, [S::zero(); 3])
                .map_err(|e| TextureError::Checkpoint(format!("header: {e}")))?;
            grid.params = read_params(&mut r, grid.params.len())?;
            Ok(AnyTexture::PlainGrid(grid))
        } else {
            Err(TextureError::Checkpoint(format!("unknown magic {magic:?}")))
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), TextureError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, TextureError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyTexture::HashGrid(_) => "hash_grid",
            AnyTexture::PlainGrid(_) => "plain_grid",
        }
    }

    /// Whether this texture can shade every surface of a scene with `surfaces` surfaces.
    pub fn covers_surfaces(&self, surfaces: usize) -> bool {
        match self {
            AnyTexture::HashGrid(_) => surfaces <= super::hash_grid::MAX_SURFACES,
            AnyTexture::PlainGrid(g) => g.surfaces >= surfaces,
        }
    }
}

impl<S: Scalar> TextureModel<S> for AnyTexture<S> {
    type Scratch = AnyScratch<S>;

    fn new_scratch(&self) -> Self::Scratch {
        match self {
            AnyTexture::HashGrid(f) => AnyScratch::HashGrid(f.new_scratch()),
            AnyTexture::PlainGrid(_) => AnyScratch::PlainGrid,
        }
    }

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn params(&self) -> &[S] {
        match self {
            AnyTexture::HashGrid(f) => &f.params,
            AnyTexture::PlainGrid(g) => &g.params,
        }
    }

    fn params_mut(&mut self) -> &mut [S] {
        match self {
            AnyTexture::HashGrid(f) => &mut f.params,
            AnyTexture::PlainGrid(g) => &mut g.params,
        }
    }

    fn eval_with(&self, hit: &SurfaceHit<S>, scratch: &mut Self::Scratch) -> [S; 3] {
        match (self, scratch) {
            (AnyTexture::HashGrid(f), AnyScratch::HashGrid(s)) => f.eval_with(hit, s),
            (AnyTexture::PlainGrid(g), _) => g.eval_with(hit, &mut ()),
            (AnyTexture::HashGrid(f), s) => {
                *s = AnyScratch::HashGrid(f.new_scratch());
                self.eval_with(hit, s)
            }
        }
    }

    fn accumulate_grad(&self, hit: &SurfaceHit<S>, upstream: [S; 3], grad: &mut [f64], scratch: &mut Self::Scratch) {
        match (self, scratch) {
            (AnyTexture::HashGrid(f), AnyScratch::HashGrid(s)) => f.accumulate_grad(hit, upstream, grad, s),
            (AnyTexture::PlainGrid(g), _) => g.accumulate_grad(hit, upstream, grad, &mut ()),
            (AnyTexture::HashGrid(f), s) => {
                *s = AnyScratch::HashGrid(f.new_scratch());
                self.accumulate_grad(hit, upstream, grad, s)
            }
        }
    }

    fn project(&mut self) {
        match self {
            AnyTexture::HashGrid(f) => f.project(),
            AnyTexture::PlainGrid(g) => g.project(),
        }
    }
}

impl<S> From<HashGridField<S>> for AnyTexture<S> {
    fn from(f: HashGridField<S>) -> Self {
        AnyTexture::HashGrid(f)
    }
}

impl<S> From<PlainGrid<S>> for AnyTexture<S> {
    fn from(g: PlainGrid<S>) -> Self {
        AnyTexture::PlainGrid(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field() -> HashGridField<f32> {
        let grid = HashGridConfig {
            levels: 2,
            features_per_level: 2,
            base_resolution: 4,
            growth_factor: 1.5,
            table_size_log2: 8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        HashGridField::new(grid, MlpConfig { hidden_layers: 1, hidden_width: 4 }, &mut rng).unwrap()
    }

    #[test]
    fn hash_grid_header_layout() {
        let tex = AnyTexture::from(field());
        let mut bytes = Vec::new();
        tex.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"MVITEX1\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1.5);
        assert_eq!(bytes.len(), 8 + 7 * 4 + tex.num_params() * 4);
        assert_eq!(AnyTexture::<f32>::read_from(&bytes[..]).unwrap(), tex);
    }

    #[test]
    fn plain_grid_round_trip() {
        let tex = AnyTexture::from(PlainGrid::filled(6, 3, [0.25f32, 0.5, 1.0]).unwrap());
        let mut bytes = Vec::new();
        tex.write_to(&mut bytes).unwrap();
        assert_eq!(AnyTexture::<f32>::read_from(&bytes[..]).unwrap(), tex);
    }

    #[test]
    fn rejects_corrupt_files() {
        let tex = AnyTexture::from(field());
        let mut bytes = Vec::new();
        tex.write_to(&mut bytes).unwrap();
        assert!(AnyTexture::<f32>::read_from(&bytes[..bytes.len() - 4]).is_err());
        assert!(AnyTexture::<f32>::read_from(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(AnyTexture::<f32>::read_from(&bad[..]).is_err());
    }
}
