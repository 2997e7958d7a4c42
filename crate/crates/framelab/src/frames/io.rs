//! Frame serialization.
//!
//! A frame file is a single JSON object:
//!
//! ```json
//! {
//!   "m": 3, "n": 7,
//!   "family": "dss",
//!   "params": { "q": 7 },
//!   "re": [[...], [...], [...]],
//!   "im": [[...], [...], [...]]
//! }
//! ```
//!
//! `re` and `im` are m×n row-major arrays. Readers reject columns whose norm
//! is further than [`READ_NORM_TOL`] from 1; columns inside that band but
//! beyond the construction tolerance are renormalized, so frames written by
//! this module round-trip bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{DifferenceSet, FamilyParams, Frame, FrameError, UNIT_NORM_TOL};
use crate::numerics::CMat;

/// Unit-norm acceptance tolerance for frames read from disk.
pub const READ_NORM_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct FrameJson {
    m: usize,
    n: usize,
    family: String,
    params: serde_json::Value,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

pub fn write_json(frame: &Frame, path: &Path) -> Result<(), FrameError> {
    let (m, n) = (frame.m(), frame.n());
    let mat = frame.matrix();
    let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m)
            .map(|i| (0..n).map(|j| f(&mat[(i, j)])).collect())
            .collect()
    };
    let doc = FrameJson {
        m,
        n,
        family: frame.family().to_string(),
        params: params_value(frame.params()),
        re: part(|z| z.re),
        im: part(|z| z.im),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Frame, FrameError> {
    let doc: FrameJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let (m, n) = (doc.m, doc.n);
    if m == 0 || m > n {
        return Err(FrameError::Invalid(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    for (name, rows) in [("re", &doc.re), ("im", &doc.im)] {
        if rows.len() != m || rows.iter().any(|r| r.len() != n) {
            return Err(FrameError::Invalid(format!(
                "{name} is not an {m}x{n} array"
            )));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(FrameError::Invalid(format!("{name} has non-finite entries")));
        }
    }
    let mut mat = CMat::from_fn(m, n, |i, j| Complex64::new(doc.re[i][j], doc.im[i][j]));
    for j in 0..n {
        let norm = mat.col_norm(j);
        if (norm - 1.0).abs() > READ_NORM_TOL {
            return Err(FrameError::UnitNorm { col: j, norm });
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            mat.scale_col(j, Complex64::new(1.0 / norm, 0.0));
        }
    }
    let params = params_from(&doc.family, doc.params)?;
    Frame::new(mat, params)
}

fn params_value(params: &FamilyParams) -> serde_json::Value {
    match params {
        FamilyParams::Lpf { m, n } => json!({ "m": m, "n": n }),
        FamilyParams::DssQr { q } => json!({ "q": q }),
        FamilyParams::DssSet { set } => {
            json!({ "modulus": set.modulus, "elements": set.elements })
        }
        FamilyParams::PaleyReal { q } | FamilyParams::PaleyComplex { q } => json!({ "q": q }),
        FamilyParams::SteinerPairs { v } => json!({ "v": v }),
        FamilyParams::SpikesFourier { m } | FamilyParams::SpikesHadamard { m } => {
            json!({ "m": m })
        }
        FamilyParams::UnionBases { m, copies } => json!({ "m": m, "copies": copies }),
        FamilyParams::IidGaussian { m, n, seed }
        | FamilyParams::Haar { m, n, seed }
        | FamilyParams::RandDft { m, n, seed }
        | FamilyParams::RandDct { m, n, seed } => json!({ "m": m, "n": n, "seed": seed }),
        FamilyParams::Custom { label } => json!({ "label": label }),
    }
}

#[derive(Deserialize)]
struct MN {
    m: usize,
    n: usize,
}
#[derive(Deserialize)]
struct Q {
    q: usize,
}
#[derive(Deserialize)]
struct V {
    v: usize,
}
#[derive(Deserialize)]
struct M {
    m: usize,
}
#[derive(Deserialize)]
struct MCopies {
    m: usize,
    copies: usize,
}
#[derive(Deserialize)]
struct Seeded {
    m: usize,
    n: usize,
    seed: u64,
}
#[derive(Deserialize)]
struct SetJson {
    modulus: usize,
    elements: Vec<usize>,
}
#[derive(Deserialize)]
struct Label {
    label: String,
}

fn params_from(family: &str, value: serde_json::Value) -> Result<FamilyParams, FrameError> {
    fn get<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, FrameError> {
        Ok(serde_json::from_value(value)?)
    }
    Ok(match family {
        "lpf" => {
            let p: MN = get(value)?;
            FamilyParams::Lpf { m: p.m, n: p.n }
        }
        "dss" => {
            if value.get("q").is_some() {
                let p: Q = get(value)?;
                FamilyParams::DssQr { q: p.q }
            } else {
                let p: SetJson = get(value)?;
                FamilyParams::DssSet {
                    set: DifferenceSet {
                        modulus: p.modulus,
                        elements: p.elements,
                    },
                }
            }
        }
        "paley_real" => FamilyParams::PaleyReal { q: get::<Q>(value)?.q },
        "paley_complex" => FamilyParams::PaleyComplex { q: get::<Q>(value)?.q },
        "steiner_pairs" => FamilyParams::SteinerPairs { v: get::<V>(value)?.v },
        "spikes_fourier" => FamilyParams::SpikesFourier { m: get::<M>(value)?.m },
        "spikes_hadamard" => FamilyParams::SpikesHadamard { m: get::<M>(value)?.m },
        "union_bases" => {
            let p: MCopies = get(value)?;
            FamilyParams::UnionBases {
                m: p.m,
                copies: p.copies,
            }
        }
        "iid_gaussian" | "haar" | "rand_dft" | "rand_dct" => {
            let p: Seeded = get(value)?;
            match family {
                "iid_gaussian" => FamilyParams::IidGaussian { m: p.m, n: p.n, seed: p.seed },
                "haar" => FamilyParams::Haar { m: p.m, n: p.n, seed: p.seed },
                "rand_dft" => FamilyParams::RandDft { m: p.m, n: p.n, seed: p.seed },
                _ => FamilyParams::RandDct { m: p.m, n: p.n, seed: p.seed },
            }
        }
        "custom" => FamilyParams::Custom {
            label: get::<Label>(value)?.label,
        },
        other => {
            return Err(FrameError::Invalid(format!("unknown frame family {other:?}")))
        }
    })
}
