use nalgebra::DMatrix;
use tsa_core::circular::{GeneralizedVonMises, VonMisesNat};
use tsa_core::data::model_file::{decode_model, encode_model};
use tsa_core::data::{load_model, save_model, Model, ModelPrior};
use tsa_core::toral::ToralBasis;
use tsa_core::TsaError;

/// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

/// D = 3, J = 1, σ = 0.5, W = first two unit vectors, ω = (−2),
/// maximal prior η = (1, −0.5), coupled prior K = 2.
fn golden_bytes() -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"TSA1");
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&3u32.to_le_bytes());
    b.extend_from_slice(&1u32.to_le_bytes());
    b.extend_from_slice(&0.5f64.to_le_bytes());
    for v in [1.0f64, 0.0, 0.0, 1.0, 0.0, 0.0] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&(-2i32).to_le_bytes());
    for v in [1.0f64, -0.5] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&2u32.to_le_bytes());
    for v in [0.0f64, 0.0, 0.25, 3.0] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

fn golden_model() -> Model {
    let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let basis = ToralBasis::new(w, vec![-2], 0.5).unwrap();
    let prior = ModelPrior {
        maximal: vec![VonMisesNat::new(1.0, -0.5)],
        coupled: GeneralizedVonMises::from_natural(vec![[0.0, 0.0], [0.25, 3.0]]),
    };
    Model::new(basis, prior).unwrap()
}

#[test]
fn crc_oracle_matches_check_value() {
    assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
}

#[test]
fn encoder_writes_the_golden_layout() {
    assert_eq!(encode_model(&golden_model()), golden_bytes());
}

#[test]
fn decoder_reads_the_golden_layout() {
    assert_eq!(decode_model(&golden_bytes()).unwrap(), golden_model());
}

#[test]
fn file_roundtrip_through_disk() {
    let dir = std::env::temp_dir().join(format!("tsa-golden-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("golden.tsa");
    save_model(&golden_model(), &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), golden_bytes());
    assert_eq!(load_model(&path).unwrap(), golden_model());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn every_single_byte_corruption_is_rejected() {
    let good = golden_bytes();
    for i in 0..good.len() {
        let mut bad = good.clone();
        bad[i] ^= 0x10;
        assert!(decode_model(&bad).is_err(), "corruption at byte {i} accepted");
    }
}

#[test]
fn future_version_is_reported_as_such() {
    let mut b = golden_bytes();
    b.truncate(b.len() - 4);
    b[4..6].copy_from_slice(&2u16.to_le_bytes());
    let crc = crc32(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    match decode_model(&b) {
        Err(TsaError::UnsupportedVersion { found: 2, supported: 1, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}
