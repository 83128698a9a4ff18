//! File formats: model, moments, result and adversarial-pair JSON, and the
//! plain-text samples format. Values are stored as `f64`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adversarial::AdversarialPair;
use crate::error::{Error, Result};
use crate::identify::IdentificationResult;
use crate::model::MixtureModel;
use crate::moments::{BinarySamples, MomentVector, Provenance, SubsetPartition};
use crate::scalar::Scalar;

/// `{"k": int, "n": int, "pi": [k reals], "m": [n rows of k reals]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub k: usize,
    pub n: usize,
    pub pi: Vec<f64>,
    pub m: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &MixtureModel<T>) -> Self {
        Self {
            k: model.k(),
            n: model.n(),
            pi: model.pi().iter().map(|x| x.to_f64_lossy()).collect(),
            m: model
                .m_rows()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x.to_f64_lossy()).collect())
                .collect(),
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.pi.len() != self.k || self.m.len() != self.n || self.m.iter().any(|r| r.len() != self.k) {
            return Err(Error::Parse(format!(
                "model file declares k = {}, n = {} but has {} weights and {} rows",
                self.k,
                self.n,
                self.pi.len(),
                self.m.len()
            )));
        }
        Ok(())
    }

    /// Validated model.
    pub fn to_model<T: Scalar>(&self) -> Result<MixtureModel<T>> {
        self.check_shape()?;
        let rows: Vec<Vec<T>> = self.m.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
        MixtureModel::from_rows(self.pi.iter().map(|&x| T::lit(x)).collect(), &rows)
    }

    /// Raw `(pi, m)` without the simplex and range checks, for estimates.
    pub fn to_parameters<T: Scalar>(&self) -> Result<(DVector<T>, DMatrix<T>)> {
        self.check_shape()?;
        let pi = DVector::from_iterator(self.k, self.pi.iter().map(|&x| T::lit(x)));
        let m = DMatrix::from_fn(self.n, self.k, |i, j| T::lit(self.m[i][j]));
        Ok((pi, m))
    }
}

fn parse_json<'a, D: Deserialize<'a>>(text: &'a str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn model_to_json<T: Scalar>(model: &MixtureModel<T>) -> String {
    to_json(&ModelFile::from_model(model))
}

pub fn model_from_json<T: Scalar>(text: &str) -> Result<MixtureModel<T>> {
    parse_json::<ModelFile>(text, "model file")?.to_model()
}

/// Reads `pi` and `m` from any JSON carrying a model's fields (model files
/// and result files alike).
pub fn parameters_from_json<T: Scalar>(text: &str) -> Result<(DVector<T>, DMatrix<T>)> {
    parse_json::<ModelFile>(text, "model file")?.to_parameters()
}

/// `{"n": int, "values": [2^n reals]}` in ascending bitmask order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsFile {
    pub n: usize,
    pub values: Vec<f64>,
}

pub fn moments_to_json<T: Scalar>(mu: &MomentVector<T>) -> String {
    to_json(&MomentsFile {
        n: mu.n(),
        values: mu.values().iter().map(|x| x.to_f64_lossy()).collect(),
    })
}

pub fn moments_from_json<T: Scalar>(text: &str) -> Result<MomentVector<T>> {
    let f: MomentsFile = parse_json(text, "moments file")?;
    MomentVector::new(f.n, f.values.iter().map(|&x| T::lit(x)).collect(), Provenance::External)
}

/// Plain text: a `#` header line, then one sample per line as `n`
/// space-separated `0`/`1` tokens.
pub fn samples_to_text(samples: &BinarySamples, seed: u64) -> String {
    let mut out = format!("# n={} N={} seed={}\n", samples.n(), samples.len(), seed);
    for row in samples.rows() {
        let line: Vec<&str> = row.iter().map(|&x| if x == 1 { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the samples format. `n` comes from an `n=` header field when
/// present, otherwise from the first data line.
pub fn samples_from_text(text: &str) -> Result<BinarySamples> {
    let mut n: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                if let Some(v) = field.strip_prefix("n=") {
                    n = Some(
                        v.parse()
                            .map_err(|_| Error::Parse(format!("bad header field '{field}'")))?,
                    );
                }
            }
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(match tok {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: token '{other}' is not 0 or 1",
                        lineno + 1
                    )))
                }
            });
        }
        let width = data.len() - before;
        match n {
            Some(expected) if expected != width => {
                return Err(Error::Parse(format!(
                    "line {}: {width} tokens, expected {expected}",
                    lineno + 1
                )))
            }
            None => n = Some(width),
            _ => {}
        }
        rows += 1;
    }
    let n = n.ok_or_else(|| Error::Parse("samples file has neither header nor data".into()))?;
    debug_assert_eq!(data.len(), rows * n);
    BinarySamples::new(n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    #[serde(rename = "S")]
    pub s: Vec<usize>,
    #[serde(rename = "T")]
    pub t: Vec<usize>,
    pub anchor: usize,
}

impl From<&SubsetPartition> for PartitionFile {
    fn from(p: &SubsetPartition) -> Self {
        Self {
            s: p.s().to_vec(),
            t: p.t().to_vec(),
            anchor: p.anchor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub sigma_k_ctilde: f64,
    pub sigma_1_ctilde: f64,
    pub eig_imag_residual: f64,
    pub eig_defect: f64,
    pub fit_residual: f64,
    pub column_scales: Vec<f64>,
    pub t_column_scales: Vec<f64>,
    pub anchor_eigenvalues: Vec<f64>,
    pub min_eigen_gap: f64,
    pub spectrum_mismatch: f64,
    pub full_size_blocks: bool,
}

/// Result JSON. `m` has one row per observable in `observables`; `k`, `n`,
/// `pi`, `m` follow the model file layout so results compare directly
/// against model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub k: usize,
    pub n: usize,
    pub pi: Vec<f64>,
    pub m: Vec<Vec<f64>>,
    pub observables: Vec<usize>,
    pub partition: PartitionFile,
    pub diagnostics: DiagnosticsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ResultFile {
    /// With `full_m`, rows cover every observable `0..n`; otherwise only the
    /// identified ones.
    pub fn new<T: Scalar>(result: &IdentificationResult<T>, full_m: Option<&DMatrix<T>>) -> Self {
        let f = |x: &T| x.to_f64_lossy();
        let rows = |m: &DMatrix<T>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().map(f).collect()).collect() };
        let (m, observables) = match full_m {
            Some(full) => (rows(full), (0..full.nrows()).collect()),
            None => (rows(&result.m_tilde), result.observables.clone()),
        };
        let d = &result.diagnostics;
        Self {
            k: result.k(),
            n: m.len(),
            pi: result.pi_tilde.iter().map(f).collect(),
            m,
            observables,
            partition: PartitionFile::from(&result.partition),
            diagnostics: DiagnosticsFile {
                sigma_k_ctilde: f(&d.sigma_k_ctilde),
                sigma_1_ctilde: f(&d.sigma_1_ctilde),
                eig_imag_residual: f(&d.eig_imag_residual),
                eig_defect: f(&d.eig_defect),
                fit_residual: f(&d.fit_residual),
                column_scales: d.column_scales.iter().map(f).collect(),
                t_column_scales: d.t_column_scales.iter().map(f).collect(),
                anchor_eigenvalues: d.anchor_eigenvalues.iter().map(f).collect(),
                min_eigen_gap: f(&d.min_eigen_gap),
                spectrum_mismatch: f(&d.spectrum_mismatch),
                full_size_blocks: d.full_size_blocks,
            },
            config: None,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialFile {
    pub base: ModelFile,
    pub alternate: ModelFile,
    pub sigma: f64,
    pub alpha: Vec<f64>,
    pub eps: f64,
    pub certified_model_gap: f64,
    pub certified_stat_gap: f64,
    /// `4 k sigma eps`.
    pub stat_gap_bound: f64,
    pub sigma_upper_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl AdversarialFile {
    pub fn new<T: Scalar>(pair: &AdversarialPair<T>) -> Self {
        let k = pair.base.k() as f64;
        Self {
            base: ModelFile::from_model(&pair.base),
            alternate: ModelFile::from_model(&pair.alternate),
            sigma: pair.sigma.to_f64_lossy(),
            alpha: pair.alpha.iter().map(|x| x.to_f64_lossy()).collect(),
            eps: pair.eps.to_f64_lossy(),
            certified_model_gap: pair.certified_model_gap.to_f64_lossy(),
            certified_stat_gap: pair.certified_stat_gap.to_f64_lossy(),
            stat_gap_bound: 4.0 * k * pair.sigma.to_f64_lossy() * pair.eps.to_f64_lossy(),
            sigma_upper_bound: pair.sigma_upper_bound.map(|x| x.to_f64_lossy()),
            config: None,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::exact_moments;
    use crate::sampler::draw_samples;

    fn sample_model() -> MixtureModel {
        MixtureModel::from_rows(vec![0.25, 0.75], &[vec![0.1, 0.9], vec![0.4, 0.3]]).unwrap()
    }

    #[test]
    fn model_json_field_names() {
        let json = model_to_json(&sample_model());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["k", "m", "n", "pi"]);
        assert_eq!(v["m"][1][0], 0.4);
        assert_eq!(model_from_json::<f64>(&json).unwrap(), sample_model());
    }

    #[test]
    fn model_json_rejects_inconsistent_shape() {
        let bad = r#"{"k": 3, "n": 1, "pi": [0.5, 0.5], "m": [[0.1, 0.2]]}"#;
        assert!(matches!(model_from_json::<f64>(bad), Err(Error::Parse(_))));
        assert!(model_from_json::<f64>("{").is_err());
        // estimates may leave the simplex; the raw reader accepts them
        let raw = r#"{"k": 2, "n": 1, "pi": [1.1, -0.1], "m": [[0.1, 0.2]]}"#;
        assert!(model_from_json::<f64>(raw).is_err());
        assert!(parameters_from_json::<f64>(raw).is_ok());
    }

    #[test]
    fn moments_json() {
        let mu = exact_moments(&sample_model()).unwrap();
        let back: MomentVector = moments_from_json(&moments_to_json(&mu)).unwrap();
        assert_eq!(back.values(), mu.values());
        assert!(moments_from_json::<f64>(r#"{"n": 2, "values": [1, 0.5]}"#).is_err());
    }

    #[test]
    fn samples_text() {
        let batch = draw_samples(&sample_model(), 5, 3).unwrap();
        let text = samples_to_text(&batch.samples, 3);
        assert!(text.starts_with("# n=2 N=5 seed=3\n"));
        assert_eq!(samples_from_text(&text).unwrap(), batch.samples);

        let empty = BinarySamples::new(4, vec![]).unwrap();
        let text = samples_to_text(&empty, 0);
        assert_eq!(text, "# n=4 N=0 seed=0\n");
        let back = samples_from_text(&text).unwrap();
        assert_eq!((back.n(), back.len()), (4, 0));

        assert_eq!(samples_from_text("1 0\n0 1\n").unwrap().len(), 2);
        assert!(samples_from_text("1 0\n0 2\n").is_err());
        assert!(samples_from_text("1 0\n0\n").is_err());
        assert!(samples_from_text("").is_err());
    }
}
