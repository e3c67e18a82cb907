use std::fmt;
use std::str::FromStr;

use super::Bm3dError;

/// Threshold multiplier used by the reference BM3D configuration.
pub const DEFAULT_LAMBDA_3D: f64 = 2.7;

/// Every BM3D tuning constant. Only `lambda_3d` is swept externally.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm3dProfile {
    pub block_size: usize,
    pub step: usize,
    /// Half-side of the search window; the window spans `2r + 1` positions.
    pub search_radius: usize,
    pub max_group1: usize,
    pub max_group2: usize,
    /// Per-pixel normalized squared distance, intensity² units.
    pub match_threshold1: f64,
    pub match_threshold2: f64,
    pub lambda_3d: f64,
    pub kaiser_beta: f64,
    pub enable_stage2: bool,
}

impl Default for Bm3dProfile {
    fn default() -> Self {
        Self {
            block_size: 8,
            step: 3,
            search_radius: 19,
            max_group1: 16,
            max_group2: 32,
            match_threshold1: 3000.0,
            match_threshold2: 400.0,
            lambda_3d: DEFAULT_LAMBDA_3D,
            kaiser_beta: 2.0,
            enable_stage2: true,
        }
    }
}

impl Bm3dProfile {
    pub fn validate(&self) -> Result<(), Bm3dError> {
        let bad = |msg: String| Err(Bm3dError::InvalidProfile(msg));
        if self.block_size < 2 {
            return bad(format!("block_size {} < 2", self.block_size));
        }
        if self.step < 1 {
            return bad("step must be >= 1".into());
        }
        if self.search_radius < self.block_size {
            return bad(format!("search_radius {} < block_size {}", self.search_radius, self.block_size));
        }
        for (name, g) in [("max_group1", self.max_group1), ("max_group2", self.max_group2)] {
            if !g.is_power_of_two() || g > 32 {
                return bad(format!("{name} {g} is not a power of two in 1..=32"));
            }
        }
        if !(self.lambda_3d > 0.0 && self.lambda_3d.is_finite()) {
            return bad(format!("lambda_3d {} must be > 0", self.lambda_3d));
        }
        if !(self.match_threshold1 >= 0.0 && self.match_threshold2 >= 0.0) {
            return bad("match thresholds must be >= 0".into());
        }
        if !self.kaiser_beta.is_finite() || self.kaiser_beta < 0.0 {
            return bad(format!("kaiser_beta {} must be >= 0", self.kaiser_beta));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda_3d: f64) -> Self {
        Self { lambda_3d, ..self.clone() }
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Bm3dError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Bm3dError> {
            value.parse().map_err(|_| Bm3dError::InvalidProfile(format!("bad value for {key}: {value:?}")))
        }
        match key {
            "block_size" => self.block_size = parse(key, value)?,
            "step" => self.step = parse(key, value)?,
            "search_radius" => self.search_radius = parse(key, value)?,
            "max_group1" => self.max_group1 = parse(key, value)?,
            "max_group2" => self.max_group2 = parse(key, value)?,
            "match_threshold1" => self.match_threshold1 = parse(key, value)?,
            "match_threshold2" => self.match_threshold2 = parse(key, value)?,
            "lambda_3d" => self.lambda_3d = parse(key, value)?,
            "kaiser_beta" => self.kaiser_beta = parse(key, value)?,
            "enable_stage2" => self.enable_stage2 = parse(key, value)?,
            _ => return Err(Bm3dError::InvalidProfile(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored.
    pub fn parse_overrides(text: &str) -> Result<Self, Bm3dError> {
        let mut profile = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Bm3dError::InvalidProfile(format!("line {}: expected key=value", lineno + 1)))?;
            profile.set(key.trim(), value.trim())?;
        }
        profile.validate()?;
        Ok(profile)
    }
}

impl fmt::Display for Bm3dProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "block_size={}", self.block_size)?;
        writeln!(f, "step={}", self.step)?;
        writeln!(f, "search_radius={}", self.search_radius)?;
        writeln!(f, "max_group1={}", self.max_group1)?;
        writeln!(f, "max_group2={}", self.max_group2)?;
        writeln!(f, "match_threshold1={}", self.match_threshold1)?;
        writeln!(f, "match_threshold2={}", self.match_threshold2)?;
        writeln!(f, "lambda_3d={}", self.lambda_3d)?;
        writeln!(f, "kaiser_beta={}", self.kaiser_beta)?;
        writeln!(f, "enable_stage2={}", self.enable_stage2)
    }
}
