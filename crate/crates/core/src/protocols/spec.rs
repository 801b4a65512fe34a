//! Protocol and sweep descriptions, as read from JSON.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::MICRO;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Sted,
    Mted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    Reset,
    PiPulse,
    HalfPiPulse,
    Emission,
    DetectionWindow,
    Idle,
    Readout,
}

impl SegmentKind {
    /// Gates act instantly at the segment start.
    pub fn is_gate(self) -> bool {
        matches!(self, SegmentKind::PiPulse | SegmentKind::HalfPiPulse)
    }

    /// Whether the segment drives the parametric coupling.
    pub fn is_driven(self) -> bool {
        matches!(self, SegmentKind::Reset | SegmentKind::Emission | SegmentKind::DetectionWindow)
    }

    /// g_p/γ used when a segment does not set one.
    pub fn default_drive(self) -> f64 {
        match self {
            SegmentKind::Reset | SegmentKind::DetectionWindow => 0.5,
            SegmentKind::Emission => 0.472,
            _ => 0.0,
        }
    }
}

/// One protocol step. Times are in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentFile", into = "SegmentFile")]
pub struct Segment {
    pub kind: SegmentKind,
    pub target: Target,
    /// Absolute start; `None` means right after the previous segment on the
    /// same target.
    pub start: Option<f64>,
    pub duration: f64,
    /// Peak g_p in units of the device γ.
    pub g_p_over_gamma: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    kind: SegmentKind,
    target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_us: Option<f64>,
    #[serde(default)]
    duration_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g_p_over_gamma: Option<f64>,
}

impl TryFrom<SegmentFile> for Segment {
    type Error = Error;
    fn try_from(f: SegmentFile) -> Result<Self> {
        Ok(Segment {
            kind: f.kind,
            target: f.target,
            start: f.start_us.map(|t| t * MICRO),
            duration: f.duration_us * MICRO,
            g_p_over_gamma: f.g_p_over_gamma,
        })
    }
}

impl From<Segment> for SegmentFile {
    fn from(s: Segment) -> Self {
        SegmentFile {
            kind: s.kind,
            target: s.target,
            start_us: s.start.map(|t| t / MICRO),
            duration_us: s.duration / MICRO,
            g_p_over_gamma: s.g_p_over_gamma,
        }
    }
}

impl Segment {
    pub fn new(kind: SegmentKind, target: Target, duration: f64) -> Self {
        Self { kind, target, start: None, duration, g_p_over_gamma: None }
    }

    pub fn at(mut self, start: f64) -> Self {
        self.start = Some(start);
        self
    }

    pub fn drive(mut self, g_over_gamma: f64) -> Self {
        self.g_p_over_gamma = Some(g_over_gamma);
        self
    }
}

/// Excited-state probabilities of the two data qubits before the first
/// segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPopulations {
    #[serde(default)]
    pub sted: f64,
    #[serde(default)]
    pub mted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default)]
    pub initial: InitialPopulations,
    pub segments: Vec<Segment>,
}

/// A segment with its absolute time span and drive resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedSegment {
    pub index: usize,
    pub kind: SegmentKind,
    pub target: Target,
    pub start: f64,
    pub end: f64,
    pub g_p_over_gamma: f64,
}

impl ProtocolSpec {
    /// Reset both devices, excite both data qubits, then open a detection
    /// window on the measurement device. A cosine emission of `emission`
    /// length is centred `arrival` after the window opens, and a readout
    /// follows the window.
    pub fn pitch_detect(reset: f64, window: f64, emission: f64, arrival: f64, readout: f64) -> Self {
        let t0 = reset;
        let segments = vec![
            Segment::new(SegmentKind::Reset, Target::Sted, reset).at(0.0),
            Segment::new(SegmentKind::Reset, Target::Mted, reset).at(0.0),
            Segment::new(SegmentKind::PiPulse, Target::Sted, 0.0).at(t0),
            Segment::new(SegmentKind::PiPulse, Target::Mted, 0.0).at(t0),
            Segment::new(SegmentKind::DetectionWindow, Target::Mted, window).at(t0),
            Segment::new(SegmentKind::Emission, Target::Sted, emission).at(t0 + arrival - emission / 2.0),
            Segment::new(SegmentKind::Readout, Target::Mted, readout),
        ];
        ProtocolSpec { initial: InitialPopulations::default(), segments }
    }

    /// Resolve start times and check the timeline.
    pub fn resolve(&self) -> Result<Vec<ResolvedSegment>> {
        for (name, p) in [("sted", self.initial.sted), ("mted", self.initial.mted)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProtocol(format!("initial {name} population {p} outside [0, 1]")));
            }
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidProtocol("protocol has no segments".into()));
        }
        let mut cursor = [0.0f64; 2];
        let mut out: Vec<ResolvedSegment> = Vec::with_capacity(self.segments.len());
        for (index, s) in self.segments.iter().enumerate() {
            let slot = s.target as usize;
            if s.kind.is_gate() {
                if s.duration != 0.0 {
                    return Err(Error::InvalidProtocol(format!("segment {index}: gates are instantaneous")));
                }
            } else if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidProtocol(format!("segment {index}: duration must be positive")));
            }
            let start = s.start.unwrap_or(cursor[slot]);
            if !(start >= 0.0 && start.is_finite()) {
                return Err(Error::InvalidProtocol(format!("segment {index}: start must be non-negative")));
            }
            let g = s.g_p_over_gamma.unwrap_or(s.kind.default_drive());
            if !g.is_finite() {
                return Err(Error::InvalidProtocol(format!("segment {index}: drive must be finite")));
            }
            let end = start + s.duration;
            for o in out.iter().filter(|o| o.target == s.target) {
                let overlaps = match (s.kind.is_gate(), o.kind.is_gate()) {
                    (true, true) => false,
                    (true, false) => start > o.start && start < o.end,
                    (false, true) => o.start > start && o.start < end,
                    (false, false) => start < o.end && o.start < end,
                };
                if overlaps {
                    return Err(Error::InvalidProtocol(format!(
                        "segments {} and {index} overlap on {:?}",
                        o.index, s.target
                    )));
                }
            }
            cursor[slot] = cursor[slot].max(end);
            out.push(ResolvedSegment { index, kind: s.kind, target: s.target, start, end, g_p_over_gamma: g });
        }
        Ok(out)
    }

    /// End of the last segment.
    pub fn duration(&self) -> Result<f64> {
        Ok(self.resolve()?.iter().map(|s| s.end).fold(0.0, f64::max))
    }

    pub fn segments_of(&self, kind: SegmentKind, target: Target) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.kind == kind && s.target == target)
    }
}

/// Sweepable quantities. The serialized names carry their units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "n_bar")]
    NBar,
    #[serde(rename = "detuning_MHz")]
    Detuning,
    #[serde(rename = "g_pm_over_gamma")]
    GpmOverGamma,
    #[serde(rename = "delta_omega_wm_MHz")]
    DeltaOmegaWm,
    #[serde(rename = "delta_omega_pm_MHz")]
    DeltaOmegaPm,
    #[serde(rename = "arrival_us")]
    Arrival,
    #[serde(rename = "window_us")]
    Window,
    #[serde(rename = "eta")]
    Eta,
}

impl SweepParam {
    pub fn column(self) -> &'static str {
        match self {
            SweepParam::NBar => "n_bar",
            SweepParam::Detuning => "detuning_MHz",
            SweepParam::GpmOverGamma => "g_pm_over_gamma",
            SweepParam::DeltaOmegaWm => "delta_omega_wm_MHz",
            SweepParam::DeltaOmegaPm => "delta_omega_pm_MHz",
            SweepParam::Arrival => "arrival_us",
            SweepParam::Window => "window_us",
            SweepParam::Eta => "eta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisFile", into = "AxisFile")]
pub struct Axis {
    pub name: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisFile {
    name: SweepParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    /// `[start, stop, count]`, inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    linspace: Option<(f64, f64, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logspace: Option<(f64, f64, usize)>,
}

impl TryFrom<AxisFile> for Axis {
    type Error = Error;
    fn try_from(f: AxisFile) -> Result<Self> {
        let values = match (f.values, f.linspace, f.logspace) {
            (Some(v), None, None) => v,
            (None, Some((a, b, n)), None) => Axis::linspace(f.name, a, b, n)?.values,
            (None, None, Some((a, b, n))) => Axis::logspace(f.name, a, b, n)?.values,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "axis `{}` needs exactly one of values, linspace, logspace",
                    f.name.column()
                )))
            }
        };
        Axis::new(f.name, values)
    }
}

impl From<Axis> for AxisFile {
    fn from(a: Axis) -> Self {
        AxisFile { name: a.name, values: Some(a.values), linspace: None, logspace: None }
    }
}

impl Axis {
    pub fn new(name: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("axis `{}` has no values", name.column())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("axis `{}` has non-finite values", name.column())));
        }
        Ok(Self { name, values })
    }

    pub fn linspace(name: SweepParam, start: f64, stop: f64, n: usize) -> Result<Self> {
        let values = match n {
            0 => vec![],
            1 => vec![start],
            _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
        };
        Axis::new(name, values)
    }

    /// `n` points spaced evenly in log between two positive end points.
    pub fn logspace(name: SweepParam, start: f64, stop: f64, n: usize) -> Result<Self> {
        if !(start > 0.0 && stop > 0.0) {
            return Err(Error::InvalidParameter("logspace end points must be positive".into()));
        }
        let lin = Axis::linspace(name, start.ln(), stop.ln(), n)?;
        Axis::new(name, lin.values.into_iter().map(f64::exp).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<Axis>,
}

impl SweepSpec {
    pub fn one(axis: Axis) -> Self {
        Self { axis1: axis, axis2: None }
    }

    pub fn two(axis1: Axis, axis2: Axis) -> Self {
        Self { axis1, axis2: Some(axis2) }
    }

    pub fn axes(&self) -> Vec<&Axis> {
        std::iter::once(&self.axis1).chain(self.axis2.as_ref()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a2) = &self.axis2 {
            if a2.name == self.axis1.name {
                return Err(Error::InvalidParameter("both axes sweep the same quantity".into()));
            }
        }
        Ok(())
    }

    /// Grid points with axis 1 varying slowest.
    pub fn points(&self) -> Vec<Vec<(SweepParam, f64)>> {
        let mut pts = Vec::new();
        for &a in &self.axis1.values {
            match &self.axis2 {
                None => pts.push(vec![(self.axis1.name, a)]),
                Some(ax2) => {
                    for &b in &ax2.values {
                        pts.push(vec![(self.axis1.name, a), (ax2.name, b)]);
                    }
                }
            }
        }
        pts
    }
}
