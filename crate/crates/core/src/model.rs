//! Shared vocabulary: drift models, time partitions, labelled random
//! streams and run manifests.

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic space-only drift `a(u)` with a known Lipschitz constant.
///
/// Drifts are restricted to named, parameterised built-ins so that a run
/// configuration serialises completely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftModel {
    Zero,
    /// `a(u) = c u`.
    Linear {
        c: f64,
    },
    /// `a(u) = cos u`.
    Cosine,
    /// `a(u) = scale * tanh u`.
    ScaledTanh {
        scale: f64,
    },
}

impl DriftModel {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DriftModel::Zero => 0.0,
            DriftModel::Linear { c } => c * u,
            DriftModel::Cosine => u.cos(),
            DriftModel::ScaledTanh { scale } => scale * u.tanh(),
        }
    }

    /// The Lipschitz constant `C_a`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            DriftModel::Zero => 0.0,
            DriftModel::Linear { c } => c.abs(),
            DriftModel::Cosine => 1.0,
            DriftModel::ScaledTanh { scale } => scale.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DriftModel::Zero => true,
            DriftModel::Linear { c } => c == 0.0,
            DriftModel::ScaledTanh { scale } => scale == 0.0,
            DriftModel::Cosine => false,
        }
    }

    /// Builds a drift from a CLI name and the `--C` coefficient
    /// (ignored for `zero` and `cosine`).
    pub fn from_name(name: &str, coefficient: Option<f64>) -> Result<Self> {
        let need = |what: &str| {
            coefficient
                .filter(|c| c.is_finite())
                .ok_or_else(|| Error::invalid(format!("drift '{what}' needs a finite --C")))
        };
        match name {
            "zero" => Ok(DriftModel::Zero),
            "linear" => Ok(DriftModel::Linear { c: need("linear")? }),
            "cosine" => Ok(DriftModel::Cosine),
            "tanh" | "scaled-tanh" => Ok(DriftModel::ScaledTanh { scale: need("tanh")? }),
            other => Err(Error::invalid(format!(
                "unknown drift '{other}' (expected zero, linear, cosine, tanh)"
            ))),
        }
    }
}

impl fmt::Display for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftModel::Zero => write!(f, "zero"),
            DriftModel::Linear { c } => write!(f, "linear(c={c})"),
            DriftModel::Cosine => write!(f, "cosine"),
            DriftModel::ScaledTanh { scale } => write!(f, "tanh(scale={scale})"),
        }
    }
}

/// `a(u)` for the given model.
pub fn drift_eval(model: &DriftModel, u: f64) -> f64 {
    model.eval(u)
}

/// A partition `0 = t_0 < t_1 < ... < t_N = 1` of the unit interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    breakpoints: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid("a partition needs at least two breakpoints"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::invalid("partition must start at 0 and end at 1"));
        }
        let mut mesh: f64 = 0.0;
        for w in breakpoints.windows(2) {
            let gap = w[1] - w[0];
            if !(gap > 0.0) {
                return Err(Error::invalid("partition breakpoints must be strictly increasing"));
            }
            mesh = mesh.max(gap);
        }
        Ok(Partition { breakpoints, mesh })
    }

    /// Breakpoints `k / n`. For `n = 3` the mesh is the largest of the
    /// three rounded gaps `1/3`, `2/3 - 1/3` and `1 - 2/3`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform partition needs N >= 1"));
        }
        let pts = (0..=n).map(|k| k as f64 / n as f64).collect();
        Partition::new(pts)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

pub fn make_uniform_partition(n: usize) -> Result<Partition> {
    Partition::uniform(n)
}

/// The generator behind every stream.
pub type SimRng = ChaCha8Rng;

/// Tag naming what a stream is used for. Streams with different tags (or
/// different replica indices) never overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Purpose(pub u64);

impl Purpose {
    pub const GAUSSIAN: Purpose = Purpose(1);
    pub const WEB: Purpose = Purpose(2);
    pub const DIRECT: Purpose = Purpose(3);
    pub const MEET: Purpose = Purpose(4);
    pub const CLUSTER_PAIR: Purpose = Purpose(5);
    pub const CLUSTER_FAN: Purpose = Purpose(6);
    pub const TROTTER: Purpose = Purpose(7);
    pub const PROP1: Purpose = Purpose(8);
    pub const SANDWICH: Purpose = Purpose(9);
    pub const WEBTEST: Purpose = Purpose(10);

    /// A derived tag, e.g. one per quadrature node or per partition size.
    pub fn indexed(self, index: u64) -> Purpose {
        Purpose(self.0 ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)).rotate_left(17))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamLabel {
    pub replica: u64,
    pub purpose: Purpose,
}

impl StreamLabel {
    pub fn new(purpose: Purpose, replica: u64) -> Self {
        StreamLabel { replica, purpose }
    }
}

/// Root of all randomness in a run.
///
/// Draw `i` of stream `(replica, purpose)` is a pure function of
/// `(master_seed, purpose, replica, i)`: the ChaCha key is derived from the
/// seed and purpose, the ChaCha stream id is the replica index and the block
/// counter is the draw position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        RngSpec { master_seed }
    }

    pub fn stream(&self, label: StreamLabel) -> SimRng {
        let mut state = self.master_seed ^ splitmix64(label.purpose.0 ^ 0x5851_F42D_4C95_7F2D);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(label.replica);
        rng
    }

    /// Stream positioned at the `counter`-th 64-bit word.
    pub fn stream_at(&self, label: StreamLabel, counter: u64) -> SimRng {
        let mut rng = self.stream(label);
        rng.set_word_pos(2 * counter as u128);
        rng
    }
}

/// `count` standard normal variates from the labelled stream.
pub fn gaussian_stream(spec: &RngSpec, label: StreamLabel, count: usize) -> Vec<f64> {
    let mut rng = spec.stream(label);
    (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    mix64(x.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

/// Everything needed to re-run a command bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub master_seed: u64,
    pub version: String,
    /// Milliseconds since the Unix epoch.
    pub started_at_ms: u128,
    pub finished_at_ms: u128,
}

impl RunManifest {
    pub fn start(command: &str, params: serde_json::Map<String, serde_json::Value>, seed: u64) -> Self {
        let now = now_ms();
        RunManifest {
            command: command.to_string(),
            params,
            master_seed: seed,
            version: crate::VERSION.to_string(),
            started_at_ms: now,
            finished_at_ms: now,
        }
    }

    pub fn finish(&mut self) {
        self.finished_at_ms = now_ms();
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl FromStr for DriftModel {
    type Err = Error;

    /// Accepts the JSON form (`{"kind":"linear","c":0.5}`) or a bare name
    /// for the parameter-free drifts.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.starts_with('{') {
            return Ok(serde_json::from_str(trimmed)?);
        }
        DriftModel::from_name(trimmed, None)
    }
}
