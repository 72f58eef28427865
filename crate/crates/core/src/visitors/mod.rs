//! Visitor models: the one-dimensional brightest-LED task with its
//! brute-force optimum, and scheduled crowds walking under the sculpture.

mod crowd;
mod simplified;

pub use crowd::{
    ArrivalGenerator, Behaviour, Crowd, CrowdUpdate, ScheduledArrival, VisitorScenario, RAISED_HAND_CLEARANCE_CM,
    STANDING_CLEARANCE_CM, WALK_SPEED,
};
pub use simplified::{
    led_level, oracle_reward, proximity_kernel, readings_for, SimplifiedEnv, ORACLE_MAX_CELLS, ORACLE_MAX_VISITORS,
};

#[derive(Debug, thiserror::Error)]
pub enum VisitorError {
    #[error("invalid environment: {0}")]
    Config(String),
    #[error("cell {cell} outside a line of {cells}")]
    CellOutOfRange { cell: usize, cells: usize },
    #[error("raw action has {got} components, expected {expected}")]
    ActionLength { got: usize, expected: usize },
    #[error("oracle enumerates at most 24 cells and 4 visitors, got {cells} cells and {visitors} visitors")]
    OracleBound { cells: usize, visitors: usize },
    #[error("invalid visitor scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
