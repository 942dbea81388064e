use std::f64::consts::PI;

use crate::error::InvalidParam;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    Constant,
    Sine,
    Triangle,
    Pulse,
    Pwl,
}

impl WaveKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "constant" => Self::Constant,
            "sine" => Self::Sine,
            "triangle" => Self::Triangle,
            "pulse" => Self::Pulse,
            "pwl" => Self::Pwl,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Sine => "sine",
            Self::Triangle => "triangle",
            Self::Pulse => "pulse",
            Self::Pwl => "pwl",
        }
    }
}

/// Stimulus description. Units follow whatever the source drives (V or A).
///
/// Periodic kinds start at phase zero at `delay`. The pulse is a single
/// rectangle of height `amplitude` lasting `width` after `delay`. PWL points
/// are `(time, value)` pairs measured from `delay`, interpolated linearly
/// and held after the last point.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSpec {
    pub kind: WaveKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub offset: f64,
    pub delay: f64,
    pub width: f64,
    pub points: Vec<(f64, f64)>,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl WaveformSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: WaveKind::Constant,
            amplitude: value,
            frequency: 0.0,
            offset: 0.0,
            delay: 0.0,
            width: 0.0,
            points: Vec::new(),
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: WaveKind::Sine,
            amplitude,
            frequency,
            ..Self::constant(0.0)
        }
    }

    pub fn triangle(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: WaveKind::Triangle,
            amplitude,
            frequency,
            ..Self::constant(0.0)
        }
    }

    pub fn pulse(amplitude: f64, delay: f64, width: f64) -> Self {
        Self {
            kind: WaveKind::Pulse,
            amplitude,
            delay,
            width,
            ..Self::constant(0.0)
        }
    }

    pub fn pwl(points: Vec<(f64, f64)>) -> Result<Self, InvalidParam> {
        let w = Self {
            kind: WaveKind::Pwl,
            points,
            ..Self::constant(0.0)
        };
        w.validate("pwl")?;
        Ok(w)
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn validate(&self, context: &str) -> Result<(), InvalidParam> {
        let finite = [
            self.amplitude,
            self.frequency,
            self.offset,
            self.delay,
            self.width,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(InvalidParam::new(context, "waveform fields must be finite"));
        }
        if self.delay < 0.0 {
            return Err(InvalidParam::new(context, "delay >= 0"));
        }
        match self.kind {
            WaveKind::Sine | WaveKind::Triangle if self.frequency <= 0.0 => {
                Err(InvalidParam::new(context, "frequency > 0 for periodic kinds"))
            }
            WaveKind::Pulse if self.width <= 0.0 => Err(InvalidParam::new(context, "width > 0 for a pulse")),
            WaveKind::Pwl => {
                if self.points.is_empty() {
                    return Err(InvalidParam::new(context, "pwl needs at least one point"));
                }
                if self.points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(InvalidParam::new(context, "pwl points must be finite"));
                }
                if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(InvalidParam::new(
                        context,
                        "pwl breakpoints strictly time-ordered",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Value at time `t`. Zero before `delay`, except for the constant kind.
    pub fn eval(&self, t: f64) -> f64 {
        if self.kind == WaveKind::Constant {
            return self.amplitude + self.offset;
        }
        if t < self.delay {
            return 0.0;
        }
        let tau = t - self.delay;
        self.offset
            + match self.kind {
                WaveKind::Constant => unreachable!(),
                WaveKind::Sine => self.amplitude * (2.0 * PI * self.frequency * tau).sin(),
                WaveKind::Triangle => {
                    let p = (tau * self.frequency).fract();
                    let unit = if p < 0.25 {
                        4.0 * p
                    } else if p < 0.75 {
                        2.0 - 4.0 * p
                    } else {
                        4.0 * p - 4.0
                    };
                    self.amplitude * unit
                }
                WaveKind::Pulse => {
                    if tau < self.width {
                        self.amplitude
                    } else {
                        0.0
                    }
                }
                WaveKind::Pwl => pwl_eval(&self.points, tau),
            }
    }
}

fn pwl_eval(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    if t <= first.0 {
        return first.1;
    }
    let idx = points.partition_point(|p| p.0 <= t);
    if idx >= points.len() {
        return points[points.len() - 1].1;
    }
    let (t0, v0) = points[idx - 1];
    let (t1, v1) = points[idx];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}
