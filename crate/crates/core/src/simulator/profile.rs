use std::fmt;
use std::str::FromStr;

/// Piecewise-linear function of time given by `(t_s, value)` breakpoints.
/// Held constant before the first and after the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    /// Breakpoint times must be finite and strictly increasing.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("profile needs at least one breakpoint".into());
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err("profile breakpoints must be finite".into());
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("profile breakpoint times must be strictly increasing".into());
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let k = pts.partition_point(|p| p.0 <= t);
        let (t0, v0) = pts[k - 1];
        let (t1, v1) = pts[k];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn min(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact integral over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        // Knots of the function restricted to [0, t].
        let mut knots = vec![0.0];
        knots.extend(
            self.points
                .iter()
                .map(|p| p.0)
                .filter(|&k| k > 0.0 && k < t),
        );
        knots.push(t);
        knots
            .windows(2)
            .map(|w| 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]))
            .sum()
    }
}

impl FromStr for Profile {
    type Err = String;

    /// Either a single number (constant) or comma-separated `t:value` pairs.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if !s.contains(':') {
            let v: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
            return Profile::new(vec![(0.0, v)]);
        }
        let mut points = Vec::new();
        for part in s.split(',') {
            let (t, v) = part
                .split_once(':')
                .ok_or_else(|| format!("expected t:value, got {:?}", part.trim()))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| format!("bad time {:?}", t.trim()))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("bad value {:?}", v.trim()))?;
            points.push((t, v));
        }
        Profile::new(points)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (t, v)) in self.points.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}:{v}")?;
        }
        Ok(())
    }
}
