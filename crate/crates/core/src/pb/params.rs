use serde::{Deserialize, Serialize};

use super::PbError;

/// One of the seventeen behaviour parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    TRuM,
    THoM,
    TRdM,
    TRuL,
    THoL,
    TRdL,
    IMax,
    TGapM,
    TGapSma,
    TGapN,
    TBgMin,
    TBgMax,
    TW,
    P,
    TSma,
    TSwMin,
    TSwMax,
}

impl Param {
    pub const ALL: [Param; 17] = [
        Param::TRuM,
        Param::THoM,
        Param::TRdM,
        Param::TRuL,
        Param::THoL,
        Param::TRdL,
        Param::IMax,
        Param::TGapM,
        Param::TGapSma,
        Param::TGapN,
        Param::TBgMin,
        Param::TBgMax,
        Param::TW,
        Param::P,
        Param::TSma,
        Param::TSwMin,
        Param::TSwMax,
    ];

    /// The parameters a learning agent controls, in action-vector order.
    /// Background timing, background probability and sweep timing are left
    /// at their defaults because they only take effect long after being set.
    pub const LEARNED: [Param; 11] = [
        Param::TRuM,
        Param::THoM,
        Param::TRdM,
        Param::TRuL,
        Param::THoL,
        Param::TRdL,
        Param::IMax,
        Param::TGapM,
        Param::TGapSma,
        Param::TGapN,
        Param::TSma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::TRuM => "t_ru_m",
            Param::THoM => "t_ho_m",
            Param::TRdM => "t_rd_m",
            Param::TRuL => "t_ru_l",
            Param::THoL => "t_ho_l",
            Param::TRdL => "t_rd_l",
            Param::IMax => "i_max",
            Param::TGapM => "t_gap_m",
            Param::TGapSma => "t_gap_sma",
            Param::TGapN => "t_gap_n",
            Param::TBgMin => "t_bg_min",
            Param::TBgMax => "t_bg_max",
            Param::TW => "t_w",
            Param::P => "p",
            Param::TSma => "t_sma",
            Param::TSwMin => "t_sw_min",
            Param::TSwMax => "t_sw_max",
        }
    }

    /// Designer default.
    pub fn default_value(self) -> f64 {
        match self {
            Param::TRuM | Param::TRuL => 1.5,
            Param::THoM | Param::THoL => 1.0,
            Param::TRdM | Param::TRdL => 2.5,
            Param::IMax => 78.0,
            Param::TGapM => 1.5,
            Param::TGapSma => 0.3,
            Param::TGapN => 1.8,
            Param::TBgMin => 45.0,
            Param::TBgMax => 90.0,
            Param::TW => 5.0,
            Param::P => 0.4,
            Param::TSma => 0.7,
            Param::TSwMin => 120.0,
            Param::TSwMax => 240.0,
        }
    }

    /// Range explored by the learning agent; `-1` maps to the lower bound
    /// and `+1` to the upper bound.
    pub fn range(self) -> (f64, f64) {
        match self {
            Param::TRuM
            | Param::THoM
            | Param::TRdM
            | Param::TRuL
            | Param::THoL
            | Param::TRdL
            | Param::TGapM
            | Param::TGapSma
            | Param::TGapN => (0.0, 5.0),
            Param::IMax => (0.0, 100.0),
            Param::TBgMin => (15.0, 60.0),
            Param::TBgMax => (60.0, 100.0),
            Param::TW => (0.0, 10.0),
            Param::P => (0.0, 1.0),
            Param::TSma => (1.0, 5.0),
            Param::TSwMin => (5.0, 200.0),
            Param::TSwMax => (200.0, 400.0),
        }
    }

    /// Values accepted by validation: the range, widened to include the
    /// default where the default sits outside it (`t_sma`).
    pub fn accepted_range(self) -> (f64, f64) {
        let (lo, hi) = self.range();
        let d = self.default_value();
        (lo.min(d), hi.max(d))
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// The full behaviour parameter vector. Times are seconds, `i_max` is a
/// percentage of PWM duty cycle and `p` a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamVector {
    pub t_ru_m: f64,
    pub t_ho_m: f64,
    pub t_rd_m: f64,
    pub t_ru_l: f64,
    pub t_ho_l: f64,
    pub t_rd_l: f64,
    pub i_max: f64,
    pub t_gap_m: f64,
    pub t_gap_sma: f64,
    pub t_gap_n: f64,
    pub t_bg_min: f64,
    pub t_bg_max: f64,
    pub t_w: f64,
    pub p: f64,
    pub t_sma: f64,
    pub t_sw_min: f64,
    pub t_sw_max: f64,
}

impl Default for ParamVector {
    fn default() -> Self {
        default_params()
    }
}

/// Designer defaults for all seventeen parameters.
pub fn default_params() -> ParamVector {
    let mut v = ParamVector {
        t_ru_m: 0.0,
        t_ho_m: 0.0,
        t_rd_m: 0.0,
        t_ru_l: 0.0,
        t_ho_l: 0.0,
        t_rd_l: 0.0,
        i_max: 0.0,
        t_gap_m: 0.0,
        t_gap_sma: 0.0,
        t_gap_n: 0.0,
        t_bg_min: 0.0,
        t_bg_max: 0.0,
        t_w: 0.0,
        p: 0.0,
        t_sma: 0.0,
        t_sw_min: 0.0,
        t_sw_max: 0.0,
    };
    for p in Param::ALL {
        v.set(p, p.default_value());
    }
    v
}

impl ParamVector {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::TRuM => self.t_ru_m,
            Param::THoM => self.t_ho_m,
            Param::TRdM => self.t_rd_m,
            Param::TRuL => self.t_ru_l,
            Param::THoL => self.t_ho_l,
            Param::TRdL => self.t_rd_l,
            Param::IMax => self.i_max,
            Param::TGapM => self.t_gap_m,
            Param::TGapSma => self.t_gap_sma,
            Param::TGapN => self.t_gap_n,
            Param::TBgMin => self.t_bg_min,
            Param::TBgMax => self.t_bg_max,
            Param::TW => self.t_w,
            Param::P => self.p,
            Param::TSma => self.t_sma,
            Param::TSwMin => self.t_sw_min,
            Param::TSwMax => self.t_sw_max,
        }
    }

    pub fn set(&mut self, p: Param, value: f64) {
        let slot = match p {
            Param::TRuM => &mut self.t_ru_m,
            Param::THoM => &mut self.t_ho_m,
            Param::TRdM => &mut self.t_rd_m,
            Param::TRuL => &mut self.t_ru_l,
            Param::THoL => &mut self.t_ho_l,
            Param::TRdL => &mut self.t_rd_l,
            Param::IMax => &mut self.i_max,
            Param::TGapM => &mut self.t_gap_m,
            Param::TGapSma => &mut self.t_gap_sma,
            Param::TGapN => &mut self.t_gap_n,
            Param::TBgMin => &mut self.t_bg_min,
            Param::TBgMax => &mut self.t_bg_max,
            Param::TW => &mut self.t_w,
            Param::P => &mut self.p,
            Param::TSma => &mut self.t_sma,
            Param::TSwMin => &mut self.t_sw_min,
            Param::TSwMax => &mut self.t_sw_max,
        };
        *slot = value;
    }

    pub fn to_array(&self) -> [f64; 17] {
        Param::ALL.map(|p| self.get(p))
    }

    /// Rejects any component outside its accepted range and inverted
    /// min/max pairs.
    pub fn validate(&self) -> Result<(), PbError> {
        for p in Param::ALL {
            let v = self.get(p);
            let (lo, hi) = p.accepted_range();
            if !v.is_finite() || v < lo || v > hi {
                return Err(PbError::ParamOutOfRange { name: p.name(), value: v, lo, hi });
            }
        }
        if self.t_bg_min > self.t_bg_max {
            return Err(PbError::InvertedPair("t_bg_min", "t_bg_max"));
        }
        if self.t_sw_min > self.t_sw_max {
            return Err(PbError::InvertedPair("t_sw_min", "t_sw_max"));
        }
        Ok(())
    }

    /// Applies `name = value` overrides, e.g. from a config file.
    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, PbError> {
        for (name, value) in overrides {
            let p = Param::from_name(name).ok_or_else(|| PbError::UnknownParam(name.to_string()))?;
            self.set(p, value);
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_designer_table() {
        let d = default_params();
        assert_eq!(
            d.to_array(),
            [1.5, 1.0, 2.5, 1.5, 1.0, 2.5, 78.0, 1.5, 0.3, 1.8, 45.0, 90.0, 5.0, 0.4, 0.7, 120.0, 240.0]
        );
        assert_eq!(d.t_ru_m, 1.5);
        assert_eq!(d.i_max, 78.0);
        assert_eq!(d.p, 0.4);
        d.validate().unwrap();
    }

    #[test]
    fn learned_subset_excludes_slow_parameters() {
        for p in [Param::TBgMin, Param::TBgMax, Param::TW, Param::P, Param::TSwMin, Param::TSwMax] {
            assert!(!Param::LEARNED.contains(&p));
        }
        assert_eq!(Param::LEARNED.len(), 11);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut v = default_params();
        v.i_max = 101.0;
        assert!(matches!(v.validate(), Err(PbError::ParamOutOfRange { name: "i_max", .. })));
        let mut v = default_params();
        v.t_sma = 0.5;
        assert!(v.validate().is_err());
        let mut v = default_params();
        v.t_sw_min = 200.0;
        v.t_sw_max = 200.0;
        v.validate().unwrap();
    }

    #[test]
    fn overrides_by_name() {
        let v = default_params().with_overrides([("t_gap_n", 0.0), ("p", 1.0)]).unwrap();
        assert_eq!(v.t_gap_n, 0.0);
        assert_eq!(v.p, 1.0);
        assert!(default_params().with_overrides([("nope", 1.0)]).is_err());
    }
}
