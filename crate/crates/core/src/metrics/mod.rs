//! Engagement measurement from IR logs: sensor calibration, per-minute
//! engagement and active-interaction counts, and the Mann-Whitney U test.

mod calibration;
mod mann_whitney;
mod minute;

pub use calibration::{calibrate, CalibrationProfile, BLOCKED_MIN_MEAN, BLOCKED_MAX_STD};
pub use mann_whitney::{mann_whitney_u, normal_approximation_p, u_statistic, MannWhitney, PValueMethod, EXACT_MAX_SAMPLE};
pub use minute::{
    active_count, engagement, minute_windows, write_minute_csv, MinuteRow, MinuteWindow, ACTIVE_THRESHOLD,
    SAMPLE_RATE_HZ,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("calibration profile covers {profile} sensors but frame has {frame}")]
    SensorCount { profile: usize, frame: usize },
    #[error("no frames inside the calibration window [{start}, {end}]")]
    EmptyCalibrationWindow { start: f64, end: f64 },
    #[error("minute window holds no frames")]
    EmptyWindow,
    #[error("sample rate must be positive, got {0}")]
    SampleRate(f64),
    #[error("Mann-Whitney samples must be non-empty")]
    EmptySample,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
