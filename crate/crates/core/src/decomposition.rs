use serde::{Deserialize, Serialize};

/// Which backend and threshold mode produced a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdMethod {
    #[serde(rename = "dwt-auto")]
    DwtAuto,
    #[serde(rename = "dwt-fixed")]
    DwtFixed,
    #[serde(rename = "dct-auto")]
    DctAuto,
    #[serde(rename = "dct-fixed")]
    DctFixed,
    #[serde(rename = "gauss")]
    Gauss,
}

impl ThresholdMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DwtAuto => "dwt-auto",
            Self::DwtFixed => "dwt-fixed",
            Self::DctAuto => "dct-auto",
            Self::DctFixed => "dct-fixed",
            Self::Gauss => "gauss",
        }
    }
}

impl std::str::FromStr for ThresholdMethod {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        [Self::DwtAuto, Self::DwtFixed, Self::DctAuto, Self::DctFixed, Self::Gauss]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| crate::error::invalid_arg(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A DWT level, a DCT mode index, or a Gaussian cutoff wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdValue {
    Index(usize),
    Cutoff(f64),
}

impl ThresholdValue {
    pub fn as_f64(self) -> f64 {
        match self {
            Self::Index(i) => i as f64,
            Self::Cutoff(c) => c,
        }
    }

    pub fn index(self) -> Option<usize> {
        match self {
            Self::Index(i) => Some(i),
            Self::Cutoff(_) => None,
        }
    }
}

impl std::fmt::Display for ThresholdValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Index(i) => write!(f, "{i}"),
            Self::Cutoff(c) => write!(f, "{c}"),
        }
    }
}

/// Conditions worth surfacing without failing the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFlags {
    /// Input carried no signal (all-zero profile, flat grid).
    #[serde(default)]
    pub degenerate: bool,
    /// Iteration reached its cap before the stopping rule fired.
    #[serde(default)]
    pub capped: bool,
    /// Cutoff iteration hit the measurement length and kept the held value.
    #[serde(default)]
    pub length_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub method: ThresholdMethod,
    pub selected_threshold: ThresholdValue,
    /// Energy ratios (DWT, by level) or form+waviness entropies (DCT, by t2).
    pub curve: Vec<(f64, f64)>,
    pub modes_computed: Option<usize>,
    #[serde(default)]
    pub flags: ReportFlags,
}

/// Three-way split of a profile or grid. Backends that only separate
/// roughness store the combined low-frequency part in `form` and leave
/// `waviness` at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub form: T,
    pub waviness: T,
    pub roughness: T,
    pub report: ThresholdReport,
}
