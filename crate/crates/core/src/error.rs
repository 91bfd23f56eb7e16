use thiserror::Error;

use crate::device::DotIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate capacitances: {0}")]
    DegenerateCapacitance(String),

    #[error("singular capacitance matrix (determinant {determinant:e} aF^2)")]
    SingularCapacitanceMatrix { determinant: f64 },

    #[error("state ({n}, {m}) outside the occupancy windows")]
    OutOfWindow { n: u32, m: u32 },

    #[error("{dot} holds no electron in state ({n}, {m})")]
    EmptyDot { dot: DotIndex, n: u32, m: u32 },

    #[error("state space of {count} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { count: usize, cap: usize },

    #[error("state graph has {} closed classes: {}", .components.len(), format_components(.components))]
    DisconnectedStates { components: Vec<Vec<(u32, u32)>> },

    #[error("stationary solve failed: {0}")]
    Numerical(String),

    #[error("solver failed at {axis1}={value1} mV, {axis2}={value2} mV: {source}")]
    Cell {
        axis1: &'static str,
        value1: f64,
        axis2: &'static str,
        value2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid sweep plan: {0}")]
    Plan(String),

    #[error("config: {0}")]
    Config(String),

    #[error("map: {0}")]
    Map(String),

    #[error("extraction: {0}")]
    Extraction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_components(components: &[Vec<(u32, u32)>]) -> String {
    components
        .iter()
        .map(|c| {
            let states: Vec<String> = c.iter().map(|(n, m)| format!("({n},{m})")).collect();
            format!("{{{}}}", states.join(" "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
