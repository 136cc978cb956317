//! Zeros of analytic functions in axis-aligned rectangles.
//!
//! Counting is done by phase tracking along the boundary (argument
//! principle), isolation by recursive bisection, and refinement by Newton
//! (or Muller when no derivative is available). Clusters that cannot be
//! separated in double precision are reported as one multiple root whose
//! location is the contour-integral centroid.

use crate::error::{Error, Result};
use crate::quasipoly::{as_quasipolynomial, polya_szego_bounds, DelaySystem, Quasipolynomial, SystemKind};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Relative size below which a boundary sample counts as a zero.
pub const BOUNDARY_ZERO_REL: f64 = 1e-13;
/// Deterministic growth sequence used when a rectangle edge hits a zero.
pub const MAX_NUDGES: usize = 8;

const MAX_PHASE_STEP: f64 = PI / 4.0;
const MAX_EDGE_DEPTH: usize = 48;
const LOG_DERIV_STEP: f64 = 0.5;
const SPLIT_FRACTIONS: [f64; 7] = [0.5, 0.4, 0.6, 0.35, 0.65, 0.3, 0.7];

/// Something that can be evaluated on the complex plane.
pub trait AnalyticFn {
    /// Value at `s` and a magnitude scale against which rounding is judged.
    fn eval(&self, s: Complex64) -> Result<(Complex64, f64)>;

    /// First derivative and its scale, when available.
    fn derivative(&self, _s: Complex64) -> Option<Result<(Complex64, f64)>> {
        None
    }

    /// Bound on the phase rotation per unit length contributed by
    /// exponential factors (the delay spread for quasipolynomials).
    fn phase_rate(&self) -> f64 {
        0.0
    }
}

impl AnalyticFn for Quasipolynomial {
    fn eval(&self, s: Complex64) -> Result<(Complex64, f64)> {
        self.eval_scaled(s, 0)
    }

    fn derivative(&self, s: Complex64) -> Option<Result<(Complex64, f64)>> {
        Some(self.eval_scaled(s, 1))
    }

    fn phase_rate(&self) -> f64 {
        self.shift_spread()
    }
}

/// Adapter for plain closures. The scale is taken as `max(1, |f|)`.
pub struct FnAnalytic<F, D = fn(Complex64) -> Complex64> {
    f: F,
    df: Option<D>,
    rate: f64,
}

impl<F: Fn(Complex64) -> Complex64> FnAnalytic<F> {
    pub fn new(f: F) -> Self {
        FnAnalytic {
            f,
            df: None,
            rate: 0.0,
        }
    }
}

impl<F, D> FnAnalytic<F, D>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    pub fn with_derivative(f: F, df: D) -> Self {
        FnAnalytic {
            f,
            df: Some(df),
            rate: 0.0,
        }
    }

    pub fn phase_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }
}

impl<F, D> AnalyticFn for FnAnalytic<F, D>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    fn eval(&self, s: Complex64) -> Result<(Complex64, f64)> {
        let v = (self.f)(s);
        Ok((v, v.norm().max(1.0)))
    }

    fn derivative(&self, s: Complex64) -> Option<Result<(Complex64, f64)>> {
        self.df.as_ref().map(|df| {
            let v = df(s);
            Ok((v, v.norm().max(1.0)))
        })
    }

    fn phase_rate(&self) -> f64 {
        self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rectangle {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rectangle {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Result<Self> {
        let r = Rectangle {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_lo, self.re_hi, self.im_lo, self.im_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.re_lo < self.re_hi) || !(self.im_lo < self.im_hi) {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.re_lo, self.re_hi, self.im_lo, self.im_hi
            )));
        }
        Ok(())
    }

    /// Square of side `side` centred at `c`.
    pub fn around(c: Complex64, side: f64) -> Self {
        let h = 0.5 * side;
        Rectangle {
            re_lo: c.re - h,
            re_hi: c.re + h,
            im_lo: c.im - h,
            im_hi: c.im + h,
        }
    }

    pub fn width(&self) -> f64 {
        self.re_hi - self.re_lo
    }

    pub fn height(&self) -> f64 {
        self.im_hi - self.im_lo
    }

    pub fn diag(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_lo + self.re_hi),
            0.5 * (self.im_lo + self.im_hi),
        )
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_lo && z.re <= self.re_hi && z.im >= self.im_lo && z.im <= self.im_hi
    }

    /// Moves every edge outward by `d` (inward for negative `d`).
    pub fn grow(&self, d: f64) -> Self {
        Rectangle {
            re_lo: self.re_lo - d,
            re_hi: self.re_hi + d,
            im_lo: self.im_lo - d,
            im_hi: self.im_hi + d,
        }
    }

    /// Corners in counter-clockwise order starting at the lower left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_lo, self.im_lo),
            Complex64::new(self.re_hi, self.im_lo),
            Complex64::new(self.re_hi, self.im_hi),
            Complex64::new(self.re_lo, self.im_hi),
        ]
    }

    /// Cuts across the longer side at fraction `t`.
    pub fn bisect(&self, t: f64) -> (Rectangle, Rectangle) {
        if self.width() >= self.height() {
            let x = self.re_lo + t * self.width();
            (
                Rectangle { re_hi: x, ..*self },
                Rectangle { re_lo: x, ..*self },
            )
        } else {
            let y = self.im_lo + t * self.height();
            (
                Rectangle { im_hi: y, ..*self },
                Rectangle { im_lo: y, ..*self },
            )
        }
    }
}

/// A located root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    #[serde(rename = "mult")]
    pub multiplicity: usize,
    /// `|f(root)|` relative to the evaluator's scale.
    pub residual: f64,
}

impl Root {
    pub fn location(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    #[serde(rename = "winding")]
    pub total_winding: usize,
    /// The rectangle actually searched (after any boundary nudge).
    pub window: Rectangle,
    /// Terminal isolating boxes, one per reported root.
    pub evidence: Vec<Rectangle>,
    /// Boxes given up on; their windings are not represented in `roots`.
    pub unresolved: Vec<Rectangle>,
}

impl RootSet {
    /// True when every unit of winding is accounted for by a reported root.
    pub fn is_complete(&self) -> bool {
        self.unresolved.is_empty()
            && self.roots.iter().map(|r| r.multiplicity).sum::<usize>() == self.total_winding
    }

    /// Roots with `Im >= 0` plus their conjugates, for real-coefficient
    /// functions searched on a window that reaches below the real axis.
    pub fn mirrored(&self, real_tol: f64) -> Vec<Root> {
        let mut out = Vec::new();
        for r in self.roots.iter().filter(|r| r.im >= -real_tol) {
            if r.im.abs() <= real_tol {
                out.push(Root { im: 0.0, ..*r });
            } else {
                out.push(*r);
                out.push(Root { im: -r.im, ..*r });
            }
        }
        out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        out
    }

    /// Largest real part among the reported roots.
    pub fn max_re(&self) -> Option<f64> {
        self.roots.iter().map(|r| r.re).max_by(f64::total_cmp)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Acceptance threshold for `|f| / scale` at a polished simple root.
    pub tol: f64,
    /// Side of the box used to confirm a simple root's multiplicity.
    pub tight_box: f64,
    /// Subdivision depth limit, in quadrisection levels.
    pub max_depth: usize,
    /// Boxes smaller than this (relative to `max(1, |centre|)`) stop splitting.
    pub min_diag: f64,
    pub deadline: Option<Instant>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tol: 1e-10,
            tight_box: 1e-6,
            max_depth: 40,
            min_diag: 1e-11,
            deadline: None,
        }
    }
}

struct Tracker<'a, F: ?Sized> {
    f: &'a F,
    density: f64,
}

/// Boundary sample: value and `|f'/f|` (zero when no derivative is known).
#[derive(Clone, Copy)]
struct Sample {
    v: Complex64,
    log_deriv: f64,
}

impl<F: AnalyticFn + ?Sized> Tracker<'_, F> {
    fn value(&self, s: Complex64) -> Result<Sample> {
        let (v, scale) = self.f.eval(s)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at {s}")));
        }
        if v.norm() <= BOUNDARY_ZERO_REL * scale {
            return Err(Error::BoundaryZero { re: s.re, im: s.im });
        }
        let log_deriv = match self.f.derivative(s) {
            Some(d) => (d?.0 / v).norm(),
            None => 0.0,
        };
        Ok(Sample { v, log_deriv })
    }

    fn segment(&self, a: Complex64, fa: Sample, b: Complex64, fb: Sample, depth: usize) -> Result<f64> {
        let d = (fb.v / fa.v).arg();
        let m = 0.5 * (a + b);
        let fm = self.value(m)?;
        let d1 = (fm.v / fa.v).arg();
        let d2 = (fb.v / fm.v).arg();
        // a zero within about one segment length of the edge makes |f'/f| * h
        // large at one of the three samples, even when the phase aliases
        let h = (b - a).norm();
        let steep = h * fa.log_deriv.max(fm.log_deriv).max(fb.log_deriv) >= LOG_DERIV_STEP;
        if !steep && d1.abs() < MAX_PHASE_STEP && d2.abs() < MAX_PHASE_STEP && (d1 + d2 - d).abs() < 1e-9 {
            return Ok(d1 + d2);
        }
        if depth >= MAX_EDGE_DEPTH || h < 1e-14 * (1.0 + a.norm()) {
            // phase cannot be resolved: a zero sits on (or next to) the edge
            return Err(Error::BoundaryZero { re: m.re, im: m.im });
        }
        Ok(self.segment(a, fa, m, fm, depth + 1)? + self.segment(m, fm, b, fb, depth + 1)?)
    }

    fn edge(&self, a: Complex64, b: Complex64) -> Result<f64> {
        let len = (b - a).norm();
        let samples = ((16.0 + len * self.f.phase_rate() * 4.0 / PI) * self.density).ceil() as usize;
        let mut total = 0.0;
        let mut prev = a;
        let mut f_prev = self.value(a)?;
        for k in 1..=samples {
            let next = a + (b - a) * (k as f64 / samples as f64);
            let f_next = self.value(next)?;
            total += self.segment(prev, f_prev, next, f_next, 0)?;
            prev = next;
            f_prev = f_next;
        }
        Ok(total)
    }

    fn winding(&self, rect: &Rectangle) -> Result<i64> {
        let c = rect.corners();
        let mut total = 0.0;
        for i in 0..4 {
            total += self.edge(c[i], c[(i + 1) % 4])?;
        }
        let turns = total / (2.0 * PI);
        let w = turns.round();
        if (turns - w).abs() > 0.05 {
            return Err(Error::Numerical(format!(
                "boundary phase {turns} turns is not an integer"
            )));
        }
        Ok(w as i64)
    }
}

fn winding_with_density<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle, density: f64) -> Result<usize> {
    let mut last = None;
    let mut d = density;
    for _ in 0..3 {
        match (Tracker { f, density: d }).winding(rect) {
            Ok(w) if w >= 0 => return Ok(w as usize),
            Ok(w) => last = Some(Error::Numerical(format!("negative winding {w}"))),
            Err(e @ Error::Numerical(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
        d *= 4.0;
    }
    Err(last.unwrap())
}

/// Number of zeros inside `rect`, counted with multiplicity. Fails with
/// [`Error::BoundaryZero`] when the boundary passes through a zero.
pub fn winding_number<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle) -> Result<usize> {
    rect.validate()?;
    winding_with_density(f, rect, 1.0)
}

/// Like [`winding_number`] but retries on boundary zeros with a rectangle
/// grown by `1e-6 * 4^k` of its diagonal, `k = 0..8`. Returns the
/// rectangle actually used.
pub fn winding_number_nudged<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle) -> Result<(usize, Rectangle)> {
    nudged(f, rect, 1.0)
}

fn nudged<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle, sign: f64) -> Result<(usize, Rectangle)> {
    rect.validate()?;
    let diag = rect.diag();
    let mut r = *rect;
    for k in 0..=MAX_NUDGES {
        match winding_with_density(f, &r, 1.0) {
            Ok(w) => return Ok((w, r)),
            Err(Error::BoundaryZero { .. }) if k < MAX_NUDGES => {
                r = rect.grow(sign * 1e-6 * 4f64.powi(k as i32) * diag);
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

struct Search<'a, F: ?Sized> {
    f: &'a F,
    opts: SearchOptions,
    roots: Vec<Root>,
    evidence: Vec<Rectangle>,
    unresolved: Vec<Rectangle>,
}

impl<F: AnalyticFn + ?Sized> Search<'_, F> {
    fn check_deadline(&self) -> Result<()> {
        match self.opts.deadline {
            Some(d) if Instant::now() >= d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }

    fn residual(&self, z: Complex64) -> f64 {
        match self.f.eval(z) {
            Ok((v, scale)) if scale > 0.0 => v.norm() / scale,
            Ok((v, _)) => v.norm(),
            Err(_) => f64::INFINITY,
        }
    }

    fn process(&mut self, rect: Rectangle, w: usize, depth: usize) -> Result<()> {
        self.check_deadline()?;
        if w == 0 {
            return Ok(());
        }
        if depth > 2 * self.opts.max_depth {
            self.unresolved.push(rect);
            return Ok(());
        }
        if w == 1 {
            if let Some(root) = self.polish_simple(&rect)? {
                self.roots.push(root);
                self.evidence.push(rect);
                return Ok(());
            }
        }
        let tiny = rect.diag() < self.opts.min_diag * rect.center().norm().max(1.0);
        let children = if tiny { None } else { self.split(&rect, w)? };
        match children {
            Some(parts) => {
                for (child, cw) in parts {
                    self.process(child, cw, depth + 1)?;
                }
            }
            None => {
                let root = self.cluster(&rect, w);
                self.roots.push(root);
                self.evidence.push(rect);
            }
        }
        Ok(())
    }

    /// Bisection with an off-centre fallback when the cut passes through a
    /// zero. Windings of the halves must add up to the parent's.
    fn split(&self, rect: &Rectangle, w: usize) -> Result<Option<Vec<(Rectangle, usize)>>> {
        for t in SPLIT_FRACTIONS {
            self.check_deadline()?;
            let (lo, hi) = rect.bisect(t);
            for density in [1.0, 4.0] {
                let pair = winding_with_density(self.f, &lo, density)
                    .and_then(|a| winding_with_density(self.f, &hi, density).map(|b| (a, b)));
                match pair {
                    Ok((a, b)) if a + b == w => return Ok(Some(vec![(lo, a), (hi, b)])),
                    Ok(_) => continue,
                    Err(Error::BoundaryZero { .. }) | Err(Error::Numerical(_)) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(None)
    }

    fn polish_simple(&self, rect: &Rectangle) -> Result<Option<Root>> {
        let start = rect.center();
        let z = match self.f.derivative(start) {
            Some(_) => newton(self.f, start, rect.diag()),
            None => muller(self.f, start, rect.diag()),
        };
        let Some(z) = z else { return Ok(None) };
        if !rect.contains(z) {
            return Ok(None);
        }
        let residual = self.residual(z);
        if !(residual < self.opts.tol) {
            return Ok(None);
        }
        let tight = Rectangle::around(z, self.opts.tight_box);
        let multiplicity = match winding_with_density(self.f, &tight, 1.0) {
            Ok(k) if k >= 1 => k,
            _ => 1,
        };
        Ok(Some(Root {
            re: z.re,
            im: z.im,
            multiplicity,
            residual,
        }))
    }

    fn cluster(&self, rect: &Rectangle, w: usize) -> Root {
        let z = if w == 1 {
            newton(self.f, rect.center(), rect.diag())
                .filter(|z| rect.contains(*z))
                .unwrap_or_else(|| rect.center())
        } else {
            contour_centroid(self.f, rect, w).unwrap_or_else(|| rect.center())
        };
        Root {
            re: z.re,
            im: z.im,
            multiplicity: w,
            residual: self.residual(z),
        }
    }
}

fn newton<F: AnalyticFn + ?Sized>(f: &F, start: Complex64, size: f64) -> Option<Complex64> {
    let mut z = start;
    let mut small_steps = 0;
    for _ in 0..100 {
        let (v, _) = f.eval(z).ok()?;
        if v == Complex64::new(0.0, 0.0) {
            return Some(z);
        }
        let (d, _) = f.derivative(z)?.ok()?;
        if d == Complex64::new(0.0, 0.0) {
            return None;
        }
        let step = v / d;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || (z - start).norm() > 4.0 * size {
            return None;
        }
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            small_steps += 1;
            if small_steps >= 2 {
                return Some(z);
            }
        }
    }
    Some(z)
}

fn muller<F: AnalyticFn + ?Sized>(f: &F, start: Complex64, size: f64) -> Option<Complex64> {
    let h = 0.1 * size;
    let mut x = [start - h, start + h, start];
    let mut fx = [f.eval(x[0]).ok()?.0, f.eval(x[1]).ok()?.0, f.eval(x[2]).ok()?.0];
    for _ in 0..100 {
        let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
        let (d1, d2) = ((fx[1] - fx[0]) / h1, (fx[2] - fx[1]) / h2);
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * fx[2] * a).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        if den == Complex64::new(0.0, 0.0) {
            return None;
        }
        let dz = -2.0 * fx[2] / den;
        let z = x[2] + dz;
        if !(z.re.is_finite() && z.im.is_finite()) || (z - start).norm() > 4.0 * size {
            return None;
        }
        x = [x[1], x[2], z];
        fx = [fx[1], fx[2], f.eval(z).ok()?.0];
        if dz.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) || fx[2] == Complex64::new(0.0, 0.0) {
            return Some(z);
        }
    }
    Some(x[2])
}

/// Mean location of the `w` zeros inside `rect` from
/// `(1 / 2 pi i w) * contour integral of (z - c) f'/f` on circles around the
/// box centre. Larger circles keep the samples away from the rounding floor
/// of a high-order zero; a circle is accepted only if it encloses exactly
/// `w` zeros, and the radius where two trapezoid resolutions agree best wins.
fn contour_centroid<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle, w: usize) -> Option<Complex64> {
    f.derivative(rect.center())?.ok()?;
    let c = rect.center();
    let trapezoid = |r: f64, n: usize| -> Option<(Complex64, Complex64)> {
        let mut count = Complex64::new(0.0, 0.0);
        let mut first = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let u = Complex64::from_polar(r, 2.0 * PI * j as f64 / n as f64);
            let (v, _) = f.eval(c + u).ok()?;
            let (d, _) = f.derivative(c + u)?.ok()?;
            let q = d / v * u;
            count += q;
            first += q * u;
        }
        Some((count / n as f64, first / n as f64))
    };
    let mut best: Option<(f64, Complex64)> = None;
    let mut r = 0.75 * rect.diag();
    for _ in 0..8 {
        if let (Some((n1, m1)), Some((n2, m2))) = (trapezoid(r, 128), trapezoid(r, 256)) {
            if (n2 - w as f64).norm() < 1e-6 && (n1 - w as f64).norm() < 1e-3 {
                let disagreement = (m1 - m2).norm();
                let est = c + m2 / w as f64;
                if best.is_none_or(|(d, _)| disagreement < d) {
                    best = Some((disagreement, est));
                }
            }
        }
        r *= 2.0;
    }
    best.map(|(_, z)| z)
}

/// All zeros inside `rect`. A boundary zero on the outer rectangle is
/// handled by the deterministic nudge of [`winding_number_nudged`].
pub fn find_roots<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle, opts: &SearchOptions) -> Result<RootSet> {
    let (total, window) = winding_number_nudged(f, rect)?;
    let mut search = Search {
        f,
        opts: *opts,
        roots: Vec::new(),
        evidence: Vec::new(),
        unresolved: Vec::new(),
    };
    search.process(window, total, 0)?;
    let mut order: Vec<usize> = (0..search.roots.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (search.roots[i], search.roots[j]);
        b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im))
    });
    Ok(RootSet {
        roots: order.iter().map(|&i| search.roots[i]).collect(),
        total_winding: total,
        window,
        evidence: order.iter().map(|&i| search.evidence[i]).collect(),
        unresolved: search.unresolved,
    })
}

/// Whether the winding of `rs` lies within the Pólya–Szegő bounds of the
/// horizontal strip spanned by its window.
pub fn polya_szego_consistent(q: &Quasipolynomial, rs: &RootSet) -> Result<bool> {
    let (lo, hi) = polya_szego_bounds(q, rs.window.im_lo, rs.window.im_hi)?;
    Ok(rs.total_winding >= lo && rs.total_winding <= hi)
}

/// Sum of absolute coefficients: every root with `Re >= 0` of a retarded
/// or delay-free system satisfies `|s| <= max(1, bound)`.
/// Unique positive root `r` of `r^n = sum c_k r^k` (`c_k >= 0`): every zero
/// of a monic polynomial whose lower coefficients are bounded by `c` lies in
/// `|s| <= r`.
fn cauchy_radius(c: &[f64]) -> f64 {
    let n = c.len() as i32;
    let excess = |r: f64| r.powi(n) - c.iter().enumerate().map(|(k, ck)| ck * r.powi(k as i32)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, c.iter().sum::<f64>().max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Coefficient bounds `c_k`, `k < n`, for roots with `Re s >= 0`, where
/// `|e^{-tau s}| <= 1`; the neutral leading term is moved to the left side.
fn nonnegative_half_bound(sys: &DelaySystem) -> f64 {
    let lead = if sys.kind() == SystemKind::Neutral {
        sys.alpha[sys.m].abs()
    } else {
        0.0
    };
    let c: Vec<f64> = (0..sys.n)
        .map(|k| (sys.a[k].abs() + sys.alpha.get(k).map_or(0.0, |v| v.abs())) / (1.0 - lead))
        .collect();
    cauchy_radius(&c)
}

/// Right edge of the search window for a system whose dominant candidate
/// is `s0`.
pub fn default_re_hi(sys: &DelaySystem, s0: f64) -> f64 {
    match sys.kind() {
        SystemKind::Neutral => {
            let lead = sys.alpha[sys.m].abs();
            if lead < 1.0 {
                (s0 + 1.0).max(nonnegative_half_bound(sys) + 1.0)
            } else {
                s0 + 1.0 + lead.ln() / sys.tau
            }
        }
        _ => (s0 + (4.0 / sys.tau).max(2.0)).max(nonnegative_half_bound(sys) + 1.0),
    }
}

/// Margin below the real axis; the window reaches down to `-h` so that
/// real roots never sit on its boundary.
pub fn real_axis_margin(tau: f64) -> f64 {
    PI / (2.0 * tau)
}

/// `[re_lo, re_hi] x [-h, im_window]` for a real-coefficient system.
pub fn upper_window(sys: &DelaySystem, s0: f64, re_lo: f64, im_window: f64) -> Result<Rectangle> {
    if !(im_window > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "im_window must be positive, got {im_window}"
        )));
    }
    Rectangle::new(re_lo, default_re_hi(sys, s0), -real_axis_margin(sys.tau), im_window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAbscissa {
    /// `None` when the window holds no root.
    pub value: Option<f64>,
    pub roots: RootSet,
    /// Always true: the value is only certified within `roots.window`.
    pub windowed: bool,
    /// Some boxes could not be resolved.
    pub degraded: bool,
}

/// Largest real part among the roots in `[re_lo, re_hi] x [-h, im_window]`.
/// `re_lo` defaults to `s0 - 10 / tau` with `s0` the admissible root.
pub fn spectral_abscissa(
    sys: &DelaySystem,
    im_window: f64,
    re_lo: Option<f64>,
    opts: &SearchOptions,
) -> Result<SpectralAbscissa> {
    sys.validate()?;
    let s0 = crate::gmid::admissible_root(sys.n, sys.m, sys.tau, sys.a_last())?;
    let re_lo = re_lo.unwrap_or(s0 - 10.0 / sys.tau);
    let s0_hint = s0.max(re_lo);
    let rect = upper_window(sys, s0_hint, re_lo, im_window)?;
    let q = as_quasipolynomial(sys);
    let roots = find_roots(&q, &rect, opts)?;
    Ok(SpectralAbscissa {
        value: roots.max_re(),
        degraded: !roots.is_complete(),
        windowed: true,
        roots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    StrictlyDominant,
    DominantOnLine { im_window: f64 },
    Violated { witnesses: Vec<Root>, reason: String },
    Unverified { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub verdict: Verdict,
    pub roots: RootSet,
    /// Multiplicity found at `s0`.
    pub cluster_multiplicity: usize,
    /// Zeros in the strip `|Im| < 2 pi / tau`, if that count succeeded. At
    /// maximal multiplicity the cluster must be the only thing there.
    pub strip_count: Option<usize>,
    pub polya_szego: (usize, usize),
    pub polya_szego_ok: bool,
}

/// Left edge used by the dominance check: far enough that the window holds
/// every root of its strip, so the Pólya–Szegő lower bound applies.
pub fn dominance_re_lo(s0: f64, tau: f64) -> f64 {
    s0 - 24.0 / tau
}

/// Tests whether `s0` is dominant within the window `Im <= im_window`.
pub fn dominance_check(
    sys: &DelaySystem,
    s0: f64,
    im_window: f64,
    margin: f64,
    opts: &SearchOptions,
) -> Result<DominanceReport> {
    sys.validate()?;
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    let q = as_quasipolynomial(sys);
    let re_lo = dominance_re_lo(s0, sys.tau);
    let rect = upper_window(sys, s0, re_lo, im_window)?;
    let roots = find_roots(&q, &rect, opts)?;
    let polya_szego = polya_szego_bounds(&q, roots.window.im_lo, roots.window.im_hi)?;
    let polya_szego_ok = (polya_szego.0..=polya_szego.1).contains(&roots.total_winding);

    let near = margin.max(1e-6 * s0.abs().max(1.0));
    let neutral = sys.kind() == SystemKind::Neutral;
    let mut cluster_multiplicity = 0;
    let mut witnesses = Vec::new();
    for r in &roots.roots {
        if (r.location() - s0).norm() <= near {
            cluster_multiplicity += r.multiplicity;
        } else if neutral {
            if (r.re - s0).abs() >= margin {
                witnesses.push(*r);
            }
        } else if r.re >= s0 - margin {
            witnesses.push(*r);
        }
    }

    let strip_count = strip_winding(&q, re_lo, rect.re_hi, sys.tau).ok();
    let verdict = if !roots.is_complete() {
        Verdict::Unverified {
            reason: format!("{} unresolved boxes", roots.unresolved.len()),
        }
    } else if cluster_multiplicity == 0 {
        let mut right: Vec<Root> = roots.roots.clone();
        right.sort_by(|x, y| y.re.total_cmp(&x.re));
        right.truncate(3);
        Verdict::Violated {
            witnesses: right,
            reason: format!("{s0} is not a root"),
        }
    } else if !witnesses.is_empty() {
        Verdict::Violated {
            witnesses,
            reason: if neutral {
                "roots off the vertical line through s0".into()
            } else {
                "roots at or right of s0".into()
            },
        }
    } else if !polya_szego_ok {
        Verdict::Unverified {
            reason: format!(
                "winding {} outside Polya-Szego bounds {:?}",
                roots.total_winding, polya_szego
            ),
        }
    } else if cluster_multiplicity == sys.m + sys.n + 1 && strip_count != Some(cluster_multiplicity) {
        Verdict::Unverified {
            reason: format!(
                "strip |Im| < 2 pi / tau holds {strip_count:?} zeros, cluster has {cluster_multiplicity}"
            ),
        }
    } else if neutral {
        Verdict::DominantOnLine {
            im_window: roots.window.im_hi,
        }
    } else {
        Verdict::StrictlyDominant
    };
    Ok(DominanceReport {
        verdict,
        roots,
        cluster_multiplicity,
        strip_count,
        polya_szego,
        polya_szego_ok,
    })
}

/// Zeros in `[re_lo, re_hi] x (-2 pi / tau, 2 pi / tau)`. A boundary zero
/// shrinks the box instead of growing it so the strip is never exceeded.
pub fn strip_winding(q: &Quasipolynomial, re_lo: f64, re_hi: f64, tau: f64) -> Result<usize> {
    let h = 2.0 * PI / tau - 1e-9;
    let rect = Rectangle::new(re_lo, re_hi, -h, h)?;
    nudged(q, &rect, -1.0).map(|(w, _)| w)
}
