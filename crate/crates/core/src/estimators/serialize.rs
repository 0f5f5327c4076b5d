//! `snrm` model files, little-endian:
//!
//! ```text
//! "SNRM" | u32 version = 1 | u8 estimator (0 ppca, 1 lfa, 2 elf, 3 heteropca)
//! | u64 d | u64 r | d f64 mean | d*r f64 loadings row-major | d f64 noise variances
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Estimator, LowRankModel};
use crate::error::{Error, Result};
use crate::io::{write_header, Reader};
use crate::scalar::Real;

pub const SNRM_MAGIC: &[u8; 4] = b"SNRM";

pub fn encode_model<T: Real>(model: &LowRankModel<T>) -> Vec<u8> {
    let (d, r) = (model.d(), model.rank());
    let mut out = Vec::with_capacity(25 + 8 * d * (r + 2));
    write_header(&mut out, SNRM_MAGIC);
    out.push(model.estimator().tag());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&(r as u64).to_le_bytes());
    let mut put = |v: T| out.extend_from_slice(&v.as_f64().to_le_bytes());
    model.mean().iter().for_each(|&v| put(v));
    for i in 0..d {
        for k in 0..r {
            put(model.loadings()[(i, k)]);
        }
    }
    model.noise_variances().iter().for_each(|&v| put(v));
    out
}

pub fn decode_model<T: Real>(bytes: &[u8]) -> Result<LowRankModel<T>> {
    let mut rd = Reader::new(bytes);
    rd.header(SNRM_MAGIC)?;
    let tag = rd.u8()?;
    let est = Estimator::from_tag(tag)
        .ok_or_else(|| Error::Format(format!("unknown estimator tag {tag}")))?;
    let d = rd.dim("d")?;
    let r = rd.dim("r")?;
    let expected = d
        .checked_mul(r + 2)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    if rd.remaining() != expected {
        return Err(Error::Format(format!(
            "dimension mismatch: d={d}, r={r} needs {expected} payload bytes, found {}",
            rd.remaining()
        )));
    }
    let mut read_vec =
        |len: usize| -> Result<Vec<T>> { (0..len).map(|_| rd.f64().map(T::lit)).collect() };
    let mean = DVector::from_vec(read_vec(d)?);
    let loadings = DMatrix::from_row_slice(d, r, &read_vec(d * r)?);
    let noise = DVector::from_vec(read_vec(d)?);
    LowRankModel::new(mean, loadings, noise, est)
}

pub fn write_model<T: Real>(model: &LowRankModel<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model<T: Real>(path: impl AsRef<Path>) -> Result<LowRankModel<T>> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(d: usize, r: usize, seed: u64, est: Estimator) -> LowRankModel<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        LowRankModel::new(
            DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5),
            DMatrix::from_fn(d, r, |_, _| rng.random::<f64>() - 0.5),
            DVector::from_fn(d, |_, _| rng.random::<f64>() + 0.1),
            est,
        )
        .unwrap()
    }

    #[test]
    fn layout() {
        let m = model(3, 1, 0, Estimator::Elf);
        let b = encode_model(&m);
        assert_eq!(&b[..4], b"SNRM");
        assert_eq!(b[8], 2);
        assert_eq!(b.len(), 4 + 4 + 1 + 8 + 8 + 8 * 3 * 3);
        assert_eq!(&b[25..33], &m.mean()[0].to_le_bytes());
        assert!(decode_model::<f64>(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[8] = 9;
        assert!(decode_model::<f64>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(d in 2usize..9, seed in any::<u64>(), tag in 0u8..4) {
            let r = 1 + (seed as usize) % (d - 1);
            let m = model(d, r, seed, Estimator::from_tag(tag).unwrap());
            let bytes = encode_model(&m);
            let back: LowRankModel<f64> = decode_model(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_model(&back), bytes);
        }
    }
}
