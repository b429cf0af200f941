//! Model files ("TSA1"): basis, weights, noise level and priors, with a
//! trailing CRC32 over everything before it.
//!
//! Layout (little-endian): magic, version u16, D u32, J u32, sigma f64,
//! W row-major D×2J f64, omega J×i32, J per-subspace prior η pairs (f64),
//! K u32, K coupled-prior η⁺ pairs (f64), CRC32 u32.

use std::path::Path;

use nalgebra::DMatrix;

use super::bytes::{expect_magic, read_file, verify_crc, write_file, Reader, Writer};
use crate::circular::{GeneralizedVonMises, VonMisesNat};
use crate::error::{check_len, Result, TsaError};
use crate::toral::ToralBasis;

pub const MODEL_MAGIC: &[u8; 4] = b"TSA1";
pub const MODEL_VERSION: u16 = 1;
const WHAT: &str = "model file";

/// Priors for the maximal-torus and coupled models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPrior {
    pub maximal: Vec<VonMisesNat>,
    pub coupled: GeneralizedVonMises,
}

impl ModelPrior {
    pub fn uniform(n_subspaces: usize) -> Self {
        ModelPrior {
            maximal: vec![VonMisesNat::UNIFORM; n_subspaces],
            coupled: GeneralizedVonMises::uniform(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub basis: ToralBasis,
    pub prior: ModelPrior,
}

impl Model {
    pub fn new(basis: ToralBasis, prior: ModelPrior) -> Result<Self> {
        check_len("maximal prior", basis.n_subspaces(), prior.maximal.len())?;
        Ok(Model { basis, prior })
    }

    pub fn with_uniform_prior(basis: ToralBasis) -> Self {
        let prior = ModelPrior::uniform(basis.n_subspaces());
        Model { basis, prior }
    }
}

pub fn encode_model(m: &Model) -> Vec<u8> {
    let b = &m.basis;
    let w = b.w();
    let mut out = Writer::new();
    out.bytes(MODEL_MAGIC);
    out.u16(MODEL_VERSION);
    out.u32(b.dim() as u32);
    out.u32(b.n_subspaces() as u32);
    out.f64(b.sigma());
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            out.f64(w[(r, c)]);
        }
    }
    b.omega().iter().for_each(|&o| out.i32(o));
    for p in &m.prior.maximal {
        out.f64(p.eta[0]);
        out.f64(p.eta[1]);
    }
    let eta = m.prior.coupled.natural();
    out.u32(eta.len() as u32);
    for &[a, c] in eta {
        out.f64(a);
        out.f64(c);
    }
    out.finish()
}

pub fn decode_model(data: &[u8]) -> Result<Model> {
    let mut r = Reader::new(data, WHAT);
    expect_magic(&mut r, MODEL_MAGIC, WHAT)?;
    let payload = verify_crc(data, WHAT)?;
    let mut r = Reader::new(&payload[4..], WHAT);
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(TsaError::UnsupportedVersion {
            what: WHAT,
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let d = r.u32()? as usize;
    let j = r.u32()? as usize;
    let sigma = r.f64()?;
    let w = DMatrix::from_row_slice(d, 2 * j, &r.f64_vec(d * 2 * j)?);
    let omega = (0..j).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
    let maximal = (0..j)
        .map(|_| Ok(VonMisesNat::new(r.f64()?, r.f64()?)))
        .collect::<Result<Vec<_>>>()?;
    let k = r.u32()? as usize;
    let eta = (0..k)
        .map(|_| Ok([r.f64()?, r.f64()?]))
        .collect::<Result<Vec<_>>>()?;
    if r.remaining() != 0 {
        return Err(TsaError::Malformed {
            what: WHAT,
            detail: format!("{} trailing bytes", r.remaining()),
        });
    }
    let basis = ToralBasis::new(w, omega, sigma)?;
    Model::new(
        basis,
        ModelPrior {
            maximal,
            coupled: GeneralizedVonMises::from_natural(eta),
        },
    )
}

pub fn save_model(m: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_model(m))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    decode_model(&read_file(path.as_ref())?)
}
