//! Characteristic-time calculus for transport through an undamped region.
//!
//! A characteristic of speed `λ` through `(x0, t0)` is the line
//! `x(t) = x0 + λ (t − t0)`. Each stripe of the undamped region is crossed at
//! most once; the crossing is described by a [`CharacteristicWindow`] clamped
//! to `[0, t0]`. The union of those windows over all components is the set
//! of times during which the energy arriving at `(x0, t0)` can travel without
//! dissipation, and its supremum over `x0` delays the onset of decay.
//!
//! Closed forms (`tau_bar`, `tau_star_bounds`, `three_speed_geometry`) live
//! next to the brute-force scan [`sup_undamped_measure`] that checks them.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimesError {
    #[error("characteristic speed must be nonzero")]
    ZeroSpeed,
    #[error("undamped region is malformed: {0}")]
    Region(&'static str),
    #[error("scan range is empty or the step is not positive")]
    EmptyScan,
    #[error("three-speed geometry needs s1 > s2 > s3 > 0 and R > 0")]
    UnsortedSpeeds,
    #[error("at least one speed is required")]
    NoSpeeds,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// The undamped set `ω^c`: a sorted union of disjoint closed stripes.
#[derive(Debug, Clone, PartialEq)]
pub struct UndampedRegion {
    stripes: Vec<Interval>,
}

impl UndampedRegion {
    pub fn new(stripes: Vec<Interval>) -> Result<Self, TimesError> {
        let region = Self { stripes };
        region.validate()?;
        Ok(region)
    }

    /// Skips validation; [`crate::model::validate_system`] reports problems.
    pub fn new_unchecked(stripes: Vec<Interval>) -> Self {
        Self { stripes }
    }

    /// The centred stripe `[−R, R]`.
    pub fn single(half_width: f64) -> Self {
        Self { stripes: alloc::vec![Interval::new(-half_width, half_width)] }
    }

    pub fn validate(&self) -> Result<(), TimesError> {
        if self.stripes.is_empty() {
            return Err(TimesError::Region("no stripes"));
        }
        for s in &self.stripes {
            if !(s.lo.is_finite() && s.hi.is_finite()) {
                return Err(TimesError::Region("non-finite stripe bound"));
            }
            if s.lo >= s.hi {
                return Err(TimesError::Region("stripe with lo >= hi"));
            }
        }
        if self.stripes.windows(2).any(|w| w[0].hi >= w[1].lo) {
            return Err(TimesError::Region("stripes overlap or are out of order"));
        }
        Ok(())
    }

    pub fn stripes(&self) -> &[Interval] {
        &self.stripes
    }

    /// `L_c = Σ (b_j − a_j)`.
    pub fn total_length(&self) -> f64 {
        self.stripes.iter().map(Interval::len).sum()
    }

    pub fn hull(&self) -> Interval {
        Interval::new(self.stripes[0].lo, self.stripes[self.stripes.len() - 1].hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.stripes.iter().any(|s| s.contains(x))
    }

    pub fn min_stripe_width(&self) -> f64 {
        self.stripes.iter().map(Interval::len).fold(f64::INFINITY, f64::min)
    }
}

/// Entry and exit time of one characteristic through one stripe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicWindow {
    pub t_en: f64,
    pub t_ex: f64,
}

impl CharacteristicWindow {
    pub fn residence(&self) -> f64 {
        self.t_ex - self.t_en
    }
}

/// Window during which the characteristic of speed `lambda` through
/// `(x0, t0)` sits inside `stripe`, clamped to `[0, t0]`.
///
/// Entry is at the upstream stripe edge and exit at the downstream one,
/// for either sign of `lambda`.
pub fn crossing_window(lambda: f64, stripe: Interval, x0: f64, t0: f64) -> Result<CharacteristicWindow, TimesError> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(TimesError::ZeroSpeed);
    }
    let c = stripe.center();
    let r = stripe.half_width();
    let sign = lambda.signum();
    let raw_en = t0 - (x0 - c + r * sign) / lambda;
    let raw_ex = t0 - (x0 - c - r * sign) / lambda;
    let t_en = raw_en.clamp(0.0, t0);
    let t_ex = raw_ex.clamp(0.0, t0);
    Ok(CharacteristicWindow { t_en, t_ex: t_ex.max(t_en) })
}

/// Total time the characteristic spends in the undamped region before `t0`.
pub fn residence_time(lambda: f64, region: &UndampedRegion, x0: f64, t0: f64) -> Result<f64, TimesError> {
    region
        .stripes()
        .iter()
        .map(|&s| crossing_window(lambda, s, x0, t0).map(|w| w.residence()))
        .sum()
}

/// Merged union of undamped windows `I(x0, t0)` and its measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowUnion {
    pub intervals: Vec<Interval>,
    pub measure: f64,
}

/// Collects the windows of every component through `(x0, t0)` and merges
/// them with a single sweep over the sorted left endpoints.
pub fn undamped_union(speeds: &[f64], region: &UndampedRegion, x0: f64, t0: f64) -> Result<WindowUnion, TimesError> {
    let mut windows = Vec::with_capacity(speeds.len() * region.stripes().len());
    for &lambda in speeds {
        for &stripe in region.stripes() {
            let w = crossing_window(lambda, stripe, x0, t0)?;
            if w.t_ex > w.t_en {
                windows.push(Interval::new(w.t_en, w.t_ex));
            }
        }
    }
    Ok(merge_intervals(windows))
}

/// Sweep-line union of closed intervals; touching intervals are merged.
pub fn merge_intervals(mut windows: Vec<Interval>) -> WindowUnion {
    windows.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut merged: Vec<Interval> = Vec::with_capacity(windows.len());
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.lo <= last.hi => last.hi = last.hi.max(w.hi),
            _ => merged.push(w),
        }
    }
    let measure = merged.iter().map(Interval::len).sum();
    WindowUnion { intervals: merged, measure }
}

/// Sample points of the brute-force `x` scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl ScanSpec {
    /// Covers every point whose characteristics can reach the region by time
    /// `t`; step is the narrowest stripe width over 400.
    pub fn auto(speeds: &[f64], region: &UndampedRegion, t: f64) -> Self {
        let vmax = speeds.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        let lc = region.total_length();
        let hull = region.hull();
        Self {
            x_min: hull.lo - vmax * t - lc,
            x_max: hull.hi + vmax * t + lc,
            step: region.min_stripe_width() / 400.0,
        }
    }

    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    fn count(&self) -> Result<usize, TimesError> {
        if !(self.step > 0.0) || !(self.x_max >= self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(TimesError::EmptyScan);
        }
        Ok(libm::floor((self.x_max - self.x_min) / self.step + 1e-9) as usize + 1)
    }

    fn point(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.step
    }
}

/// Result of the `x` scan: largest `|I(x, t)|` and the smallest `x` attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanMax {
    pub sup: f64,
    pub argmax: f64,
}

/// Brute-force `sup_x |I(x, t)|` over the scan grid.
pub fn sup_undamped_measure(
    speeds: &[f64],
    region: &UndampedRegion,
    t: f64,
    scan: ScanSpec,
) -> Result<ScanMax, TimesError> {
    let count = scan.count()?;
    let mut best = ScanMax { sup: f64::NEG_INFINITY, argmax: scan.x_min };
    for k in 0..count {
        let x = scan.point(k);
        let m = undamped_union(speeds, region, x, t)?.measure;
        if m > best.sup {
            best = ScanMax { sup: m, argmax: x };
        }
    }
    Ok(best)
}

/// `d(t) = t − sup_x |I(x, t)|`, the effective dissipation time at `t`.
pub fn sharp_delay(speeds: &[f64], region: &UndampedRegion, t: f64, scan: ScanSpec) -> Result<f64, TimesError> {
    Ok(t - sup_undamped_measure(speeds, region, t, scan)?.sup)
}

/// Sum of `1/|λ|` over the negative and positive speeds.
fn inverse_speed_sums(speeds: &[f64]) -> (f64, f64) {
    speeds.iter().fold((0.0, 0.0), |(neg, pos), &l| {
        if l < 0.0 {
            (neg + 1.0 / -l, pos)
        } else {
            (neg, pos + 1.0 / l)
        }
    })
}

/// Delay after which the full-damping rates resume.
///
/// For a single stripe of half-width `R` this is
/// `max(Σ_{λ<0} 2R/|λ|, Σ_{λ>0} 2R/|λ|)`; for several stripes every stripe
/// contributes its width, which is an upper bound.
pub fn tau_bar(speeds: &[f64], region: &UndampedRegion) -> f64 {
    let (neg, pos) = inverse_speed_sums(speeds);
    region.total_length() * neg.max(pos)
}

/// Magnitudes of the sign group attaining `tau_bar`, sorted fastest first.
///
/// Ties go to the larger group, then to the positive speeds.
pub fn dominant_group(speeds: &[f64]) -> Vec<f64> {
    let (neg, pos) = inverse_speed_sums(speeds);
    let n_neg = speeds.iter().filter(|&&l| l < 0.0).count();
    let n_pos = speeds.len() - n_neg;
    let take_negative = neg > pos || (neg == pos && n_neg > n_pos);
    let mut group: Vec<f64> = speeds
        .iter()
        .filter(|&&l| if take_negative { l < 0.0 } else { l > 0.0 })
        .map(|l| l.abs())
        .collect();
    group.sort_by(|a, b| b.total_cmp(a));
    group
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauStarBounds {
    /// `2R/s_slowest + 2R/s_second_slowest` in the dominant group; zero when
    /// the group has fewer than two members.
    pub lemma_lower: f64,
    pub lemma_defined: bool,
    /// Exact value for three same-sign speeds.
    pub exact_three_speed: Option<f64>,
    pub upper: f64,
}

/// Bounds on the longest contiguous conservation time `τ*` for a single stripe.
pub fn tau_star_bounds(speeds: &[f64], region: &UndampedRegion) -> Result<TauStarBounds, TimesError> {
    if speeds.is_empty() {
        return Err(TimesError::NoSpeeds);
    }
    let width = region.total_length();
    let half = 0.5 * width;
    let upper = tau_bar(speeds, region);
    let group = dominant_group(speeds);
    let (lemma_lower, lemma_defined) = match group.as_slice() {
        [.., second, slowest] => (width / slowest + width / second, true),
        _ => (0.0, false),
    };
    let exact_three_speed = if speeds.len() == 3 && group.len() == 3 {
        Some(three_speed_geometry(group[0], group[1], group[2], half)?.tau_star())
    } else {
        None
    };
    Ok(TauStarBounds { lemma_lower, lemma_defined, exact_three_speed, upper })
}

const RATIO_TOL: f64 = 1e-12;

/// Whether consecutive speed ratios in the dominant group are all equal,
/// the condition for `τ* = τ̄`.
pub fn geometric_ratio_holds(speeds: &[f64]) -> bool {
    let group = dominant_group(speeds);
    if group.len() <= 2 {
        return true;
    }
    let ratios: Vec<f64> = group.windows(2).map(|w| w[0] / w[1]).collect();
    ratios.windows(2).all(|r| (r[0] - r[1]).abs() <= RATIO_TOL * r[0].abs().max(r[1].abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreeSpeedCase {
    /// `s2² > s1·s3`: middle and fast windows overlap at the corner point.
    Overlap,
    /// `s2² < s1·s3`: a gap separates the middle and fast windows.
    Gap,
    /// `s2² = s1·s3`: all three windows abut.
    Geometric,
}

/// Corner points of three same-sign characteristics crossing `[−R, R]`.
///
/// Everything is written for rightward movers; leftward movers are the
/// mirror image `x → −x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSpeedGeometry {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub half_width: f64,
    /// Slow exit meets middle entry.
    pub x2: f64,
    pub t2: f64,
    /// Middle exit meets fast entry.
    pub x1: f64,
    pub t1: f64,
    pub t_lambda: f64,
    pub case: ThreeSpeedCase,
}

pub fn three_speed_geometry(s1: f64, s2: f64, s3: f64, half_width: f64) -> Result<ThreeSpeedGeometry, TimesError> {
    if !(s1 > s2 && s2 > s3 && s3 > 0.0 && half_width > 0.0) || !s1.is_finite() {
        return Err(TimesError::UnsortedSpeeds);
    }
    let r = half_width;
    let x2 = r * (s2 + s3) / (s2 - s3);
    let t2 = 2.0 * r * s2 / (s3 * (s2 - s3));
    let x1 = r * (s1 + s2) / (s1 - s2);
    let t1 = 2.0 * r * s1 / (s3 * (s1 - s2));
    let disc = s2 * s2 - s1 * s3;
    let t_lambda = (2.0 * r * disc / (s1 * s2 * (s2 - s3))).max(0.0);
    let case = if disc.abs() <= RATIO_TOL * s2 * s2 {
        ThreeSpeedCase::Geometric
    } else if disc > 0.0 {
        ThreeSpeedCase::Overlap
    } else {
        ThreeSpeedCase::Gap
    };
    let t_lambda = if case == ThreeSpeedCase::Geometric { 0.0 } else { t_lambda };
    Ok(ThreeSpeedGeometry { s1, s2, s3, half_width, x2, t2, x1, t1, t_lambda, case })
}

impl ThreeSpeedGeometry {
    pub fn speeds(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }

    pub fn residences(&self) -> [f64; 3] {
        let w = 2.0 * self.half_width;
        [w / self.s1, w / self.s2, w / self.s3]
    }

    pub fn tau_bar(&self) -> f64 {
        self.residences().iter().sum()
    }

    /// Longest contiguous undamped corridor starting at `t = 0`.
    pub fn tau_star(&self) -> f64 {
        let [fast, middle, slow] = self.residences();
        match self.case {
            ThreeSpeedCase::Gap => slow + middle,
            ThreeSpeedCase::Overlap | ThreeSpeedCase::Geometric => slow + middle + fast - self.t_lambda,
        }
    }

    /// Position at time `t` on the slow characteristic entering at `(−R, 0)`.
    pub fn slow_line(&self, t: f64) -> f64 {
        -self.half_width + self.s3 * t
    }

    /// `t − |I(x(t), t)|` along the slow characteristic: piecewise linear in `t`.
    pub fn slow_line_delay(&self, t: f64) -> f64 {
        let region = UndampedRegion::single(self.half_width);
        let union = undamped_union(&self.speeds(), &region, self.slow_line(t), t)
            .expect("speeds are positive by construction");
        t - union.measure
    }
}
