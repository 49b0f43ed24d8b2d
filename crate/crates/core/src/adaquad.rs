//! Adaptive certified quadrature.
//!
//! A state is a partition of the domain into boxes `K`, each carrying the
//! interval `B_K = F(K)·vol(K)` that contains `∫_K f`, a quadrature value
//! `Q_K ∈ B_K` and the local error bound `η_K = w(B_K)`. Summing gives the
//! certificate `|∫_Ω f - Q| <= η`. Each step marks cells by Dörfler's bulk
//! criterion and refines them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::enclosure::HoelderParams;
use crate::error::{config_err, Error, Result};
use crate::interval::{Interval, IntervalBox, Rounding};
use crate::quadrature::QuadratureRule;

/// Default limit on the number of children produced from one cell.
pub const DEFAULT_MAX_CHILDREN: usize = 1 << 16;

/// An integrand with a point evaluator and a box enclosure.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
    /// Must contain `{f(x) : x ∈ K}` and be inclusion isotonic.
    fn enclose(&self, k: &IntervalBox) -> Result<Interval>;
    /// Exact value of `∫_K f` when one is available.
    fn exact(&self, _k: &IntervalBox) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Integrand built from two closures.
pub struct FnIntegrand<F, G> {
    dim: usize,
    f: F,
    enc: G,
}

impl<F, G> FnIntegrand<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&IntervalBox) -> Result<Interval> + Sync,
{
    pub fn new(dim: usize, f: F, enc: G) -> Self {
        FnIntegrand { dim, f, enc }
    }
}

impl<F, G> Integrand for FnIntegrand<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&IntervalBox) -> Result<Interval> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
    fn enclose(&self, k: &IntervalBox) -> Result<Interval> {
        (self.enc)(k)
    }
}

/// `P = (f, F, Ω)` with optional Hölder parameters of `F` on `Ω`.
pub struct ProblemInstance<'a> {
    pub integrand: &'a dyn Integrand,
    pub domain: IntervalBox,
    pub hoelder: Option<HoelderParams>,
}

impl<'a> ProblemInstance<'a> {
    pub fn new(integrand: &'a dyn Integrand, domain: IntervalBox) -> Result<Self> {
        if integrand.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: integrand.dim(),
                got: domain.dim(),
            });
        }
        Ok(ProblemInstance {
            integrand,
            domain,
            hoelder: None,
        })
    }

    pub fn with_hoelder(mut self, hp: HoelderParams) -> Self {
        self.hoelder = Some(hp);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Refinement {
    /// Per-axis grid with counts from the Hölder parameters.
    Hoelder {
        rho: f64,
        #[serde(default = "default_max_children")]
        max_children: usize,
    },
    /// Bisect every axis.
    Half,
}

fn default_max_children() -> usize {
    DEFAULT_MAX_CHILDREN
}

impl Refinement {
    pub fn hoelder(rho: f64) -> Self {
        Refinement::Hoelder {
            rho,
            max_children: DEFAULT_MAX_CHILDREN,
        }
    }
}

/// `A = (rule, marking, refinement)`; marking is Dörfler with bulk `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmInstance {
    pub rule: QuadratureRule,
    pub theta: f64,
    pub refinement: Refinement,
    pub rounding: Rounding,
}

impl AlgorithmInstance {
    pub fn new(rule: QuadratureRule, theta: f64, refinement: Refinement) -> Result<Self> {
        let a = AlgorithmInstance {
            rule,
            theta,
            refinement,
            rounding: Rounding::Outward,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn with_rounding(mut self, r: Rounding) -> Self {
        self.rounding = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config_err("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        if let Refinement::Hoelder { rho, max_children } = self.refinement {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(config_err("rho", format!("must lie in (0, 1), got {rho}")));
            }
            if max_children < 2 {
                return Err(config_err("max_children", "must be at least 2"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: u64,
    pub region: IntervalBox,
    /// `F(K)`; collapses to the cell average for exact cells.
    pub enclosure: Interval,
    /// `B_K ⊇ ∫_K f`.
    pub bound: Interval,
    pub quad: f64,
    pub eta: f64,
    /// Value came from the exact integrator.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub cells: Vec<Cell>,
    pub step: usize,
    next_id: u64,
}

impl State {
    /// `Q_n = Σ Q_K`.
    pub fn quad(&self) -> f64 {
        self.cells.iter().map(|c| c.quad).sum()
    }

    /// `η_n = Σ η_K`.
    pub fn eta(&self) -> f64 {
        self.cells.iter().map(|c| c.eta).sum()
    }

    /// `[Σ lower(B_K), Σ upper(B_K)]`, summed with outward rounding.
    pub fn bounds(&self) -> Interval {
        Rounding::Outward.sum(self.cells.iter().map(|c| c.bound))
    }

    pub fn gap(&self) -> f64 {
        self.bounds().width()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.cells.iter().map(|c| c.region.volume()).sum()
    }

    /// CSV with columns `lo_1,hi_1,...,lo_d,hi_d,lower,upper,quad,eta`.
    pub fn partition_csv(&self) -> String {
        let d = self.cells.first().map_or(0, |c| c.region.dim());
        let mut out = String::new();
        for i in 1..=d {
            let _ = write!(out, "lo_{i},hi_{i},");
        }
        out.push_str("lower,upper,quad,eta\n");
        for c in &self.cells {
            for a in c.region.axes() {
                let _ = write!(out, "{},{},", a.lo(), a.hi());
            }
            let _ = writeln!(out, "{},{},{},{}", c.bound.lo(), c.bound.hi(), c.quad, c.eta);
        }
        out
    }

    /// The same records as [`partition_csv`](Self::partition_csv), as JSON.
    pub fn partition_json(&self) -> String {
        let records: Vec<PartitionRecord> = self
            .cells
            .iter()
            .map(|c| PartitionRecord {
                id: c.id,
                bounds: c.region.axes().iter().map(|&a| a.into()).collect(),
                lower: c.bound.lo(),
                upper: c.bound.hi(),
                quad: c.quad,
                eta: c.eta,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("partition serialization cannot fail")
    }
}

/// One line of a partition dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub id: u64,
    pub bounds: Vec<[f64; 2]>,
    pub lower: f64,
    pub upper: f64,
    pub quad: f64,
    pub eta: f64,
}

/// Diagnostics from one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub marked: usize,
    pub children: usize,
    pub eta_before: f64,
    pub eta_after: f64,
    /// `Σ_children η_K' / η_K` per refined cell.
    pub local_ratios: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    EtaTarget,
    /// `η = 0`: nothing left to refine.
    Exact,
    /// The next step would exceed the cell budget.
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_steps: Option<usize>,
    pub eta_target: Option<f64>,
    pub max_cells: Option<usize>,
}

impl StopCriteria {
    pub fn steps(n: usize) -> Self {
        StopCriteria {
            max_steps: Some(n),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps.is_none() && self.eta_target.is_none() && self.max_cells.is_none() {
            return Err(config_err("stop", "at least one stopping criterion is required"));
        }
        if let Some(t) = self.eta_target {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_err("stop.eta_target", format!("must be non-negative, got {t}")));
            }
        }
        if self.max_cells == Some(0) {
            return Err(config_err("stop.max_cells", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub eta: f64,
    pub cells: usize,
    pub quad: f64,
    pub lower: f64,
    pub upper: f64,
}

impl HistoryEntry {
    fn of(s: &State) -> Self {
        let b = s.bounds();
        HistoryEntry {
            step: s.step,
            eta: s.eta(),
            cells: s.len(),
            quad: s.quad(),
            lower: b.lo(),
            upper: b.hi(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: State,
    pub history: Vec<HistoryEntry>,
    pub stop: StopReason,
}

fn make_cell(id: u64, region: IntervalBox, p: &ProblemInstance<'_>, a: &AlgorithmInstance) -> Result<Cell> {
    let r = a.rounding;
    if let Some(q) = p.integrand.exact(&region)? {
        let vol = region.volume();
        let avg = if vol > 0.0 { q / vol } else { 0.0 };
        return Ok(Cell {
            id,
            region,
            enclosure: Interval::point(avg),
            bound: Interval::point(q),
            quad: q,
            eta: 0.0,
            exact: true,
        });
    }
    let f = p.integrand.enclose(&region)?;
    let vol = region.volume_enclosure(r);
    let bound = r.mul(f, vol);
    let q = a.rule.integrate(|x| p.integrand.eval(x), &region)?;
    // float summation can leave the box by a few ulps
    let quad = q.clamp(bound.lo(), bound.hi());
    Ok(Cell {
        id,
        region,
        enclosure: f,
        bound,
        quad,
        eta: bound.width(),
        exact: false,
    })
}

/// Trivial partition `{Ω}`.
pub fn init(p: &ProblemInstance<'_>, a: &AlgorithmInstance) -> Result<State> {
    a.validate()?;
    let cell = make_cell(0, p.domain.clone(), p, a)?;
    Ok(State {
        cells: vec![cell],
        step: 0,
        next_id: 1,
    })
}

/// Dörfler marking: take cells in order of decreasing `η` (ties broken by
/// id), adding whole groups of equal `η`, until the marked mass reaches
/// `θ·Σ η`. Cells with `η = 0` are never marked.
pub fn doerfler_mark(errors: &[(u64, f64)], theta: f64) -> Vec<u64> {
    let mut order: Vec<(u64, f64)> = errors.iter().copied().filter(|&(_, e)| e > 0.0).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: f64 = order.iter().map(|&(_, e)| e).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let target = theta * total;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    let mut i = 0;
    while i < order.len() && acc < target {
        let level = order[i].1;
        while i < order.len() && order[i].1 == level {
            marked.push(order[i].0);
            acc += level;
            i += 1;
        }
    }
    marked
}

/// Grid refinement with `m_i = ⌈l_i (C vol(K) / (ρ η_K))^{1/γ}⌉` parts along
/// axis `i`, where `η_K = w(F(K))·vol(K)`.
pub fn hoelder_refine(
    k: &IntervalBox,
    f_width: f64,
    hp: &HoelderParams,
    rho: f64,
    max_children: usize,
) -> Result<Vec<IntervalBox>> {
    let vol = k.volume();
    let eta = f_width * vol;
    if eta <= 0.0 {
        return Err(Error::ZeroErrorCell);
    }
    let scale = (hp.c * vol / (rho * eta)).powf(1.0 / hp.gamma);
    let mut counts = Vec::with_capacity(k.dim());
    let mut total: u128 = 1;
    for a in k.axes() {
        let m = (a.width() * scale).ceil();
        let m = if m.is_finite() && m >= 1.0 { m } else if m.is_finite() { 1.0 } else { f64::MAX };
        let m_int = if m > u64::MAX as f64 { u128::MAX } else { m as u128 };
        total = total.saturating_mul(m_int);
        counts.push(m_int);
    }
    if total > max_children as u128 {
        return Err(Error::RefinementTooFine {
            requested: total,
            limit: max_children,
        });
    }
    Ok(grid(k, &counts.iter().map(|&m| m as usize).collect::<Vec<_>>()))
}

/// Splits every axis at its midpoint: `2^d` children.
pub fn half_refine(k: &IntervalBox) -> Vec<IntervalBox> {
    grid(k, &vec![2; k.dim()])
}

/// Uniform grid with `counts[i]` parts along axis `i`, in lexicographic
/// order with the last axis fastest.
fn grid(k: &IntervalBox, counts: &[usize]) -> Vec<IntervalBox> {
    let splits: Vec<Vec<Interval>> = k
        .axes()
        .iter()
        .zip(counts)
        .map(|(a, &m)| {
            let (lo, hi) = (a.lo(), a.hi());
            let pt = |j: usize| {
                if j == 0 {
                    lo
                } else if j == m {
                    hi
                } else {
                    (lo + (hi - lo) * (j as f64 / m as f64)).clamp(lo, hi)
                }
            };
            (0..m).map(|j| Interval::raw(pt(j), pt(j + 1))).collect()
        })
        .collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        out.push(IntervalBox::from_axes_unchecked(
            idx.iter().enumerate().map(|(ax, &j)| splits[ax][j]).collect(),
        ));
        for ax in (0..counts.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < counts[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    out
}

/// Surrogate error `C·w(K)^γ·vol(K)` used to analyse halving.
pub fn halving_surrogate(k: &IntervalBox, hp: &HoelderParams) -> f64 {
    hp.c * k.width().powf(hp.gamma) * k.volume()
}

fn children_of(cell: &Cell, p: &ProblemInstance<'_>, a: &AlgorithmInstance) -> Result<Vec<IntervalBox>> {
    match a.refinement {
        Refinement::Half => Ok(half_refine(&cell.region)),
        Refinement::Hoelder { rho, max_children } => {
            let hp = p
                .hoelder
                .ok_or_else(|| config_err("refinement", "Hölder refinement needs Hölder parameters"))?;
            hoelder_refine(&cell.region, cell.enclosure.width(), &hp, rho, max_children)
        }
    }
}

#[cfg(feature = "parallel")]
fn evaluate_jobs(
    jobs: Vec<(u64, IntervalBox)>,
    p: &ProblemInstance<'_>,
    a: &AlgorithmInstance,
) -> Result<Vec<Cell>> {
    use rayon::prelude::*;
    jobs.into_par_iter()
        .map(|(id, region)| make_cell(id, region, p, a))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate_jobs(
    jobs: Vec<(u64, IntervalBox)>,
    p: &ProblemInstance<'_>,
    a: &AlgorithmInstance,
) -> Result<Vec<Cell>> {
    jobs.into_iter()
        .map(|(id, region)| make_cell(id, region, p, a))
        .collect()
}

/// One mark-and-refine step. Marked cells are replaced in place by their
/// children; everything else is carried over untouched.
pub fn step(s: &State, p: &ProblemInstance<'_>, a: &AlgorithmInstance) -> Result<(State, StepStats)> {
    let errors: Vec<(u64, f64)> = s.cells.iter().map(|c| (c.id, c.eta)).collect();
    let marked = doerfler_mark(&errors, a.theta);
    let eta_before = s.eta();
    let mut stats = StepStats {
        marked: marked.len(),
        eta_before,
        ..Default::default()
    };
    let mut next = State {
        cells: Vec::with_capacity(s.len()),
        step: s.step + 1,
        next_id: s.next_id,
    };
    if marked.is_empty() {
        next.cells = s.cells.clone();
        stats.eta_after = eta_before;
        return Ok((next, stats));
    }
    let marked: std::collections::HashSet<u64> = marked.into_iter().collect();
    // (position in the new list, parent index) for each child job
    let mut jobs = Vec::new();
    let mut layout: Vec<std::result::Result<usize, usize>> = Vec::new();
    let mut parents = Vec::new();
    for (ci, cell) in s.cells.iter().enumerate() {
        if marked.contains(&cell.id) {
            let kids = children_of(cell, p, a)?;
            parents.push((ci, kids.len()));
            for region in kids {
                layout.push(Err(jobs.len()));
                jobs.push((next.next_id, region));
                next.next_id += 1;
            }
        } else {
            layout.push(Ok(ci));
        }
    }
    stats.children = jobs.len();
    let mut fresh: Vec<Option<Cell>> = evaluate_jobs(jobs, p, a)?.into_iter().map(Some).collect();
    let mut offset = 0;
    for (ci, n) in parents {
        let sum: f64 = fresh[offset..offset + n]
            .iter()
            .map(|c| c.as_ref().map_or(0.0, |c| c.eta))
            .sum();
        stats.local_ratios.push(sum / s.cells[ci].eta);
        offset += n;
    }
    for slot in layout {
        match slot {
            Ok(ci) => next.cells.push(s.cells[ci].clone()),
            Err(j) => next.cells.push(fresh[j].take().expect("each child used once")),
        }
    }
    stats.eta_after = next.eta();
    Ok((next, stats))
}

/// Runs init followed by steps until a stopping criterion fires.
pub fn run(p: &ProblemInstance<'_>, a: &AlgorithmInstance, stop: &StopCriteria) -> Result<RunOutcome> {
    run_with(p, a, stop, |_, _| {})
}

/// [`run`] with a callback after every step.
pub fn run_with<C>(
    p: &ProblemInstance<'_>,
    a: &AlgorithmInstance,
    stop: &StopCriteria,
    mut on_step: C,
) -> Result<RunOutcome>
where
    C: FnMut(&State, &StepStats),
{
    stop.validate()?;
    let mut state = init(p, a)?;
    let mut history = vec![HistoryEntry::of(&state)];
    let reason = loop {
        if state.eta() == 0.0 {
            break StopReason::Exact;
        }
        if let Some(t) = stop.eta_target {
            if state.eta() <= t {
                break StopReason::EtaTarget;
            }
        }
        if let Some(n) = stop.max_steps {
            if state.step >= n {
                break StopReason::MaxSteps;
            }
        }
        let (next, stats) = step(&state, p, a)?;
        if let Some(cap) = stop.max_cells {
            if next.len() > cap {
                break StopReason::BudgetExhausted;
            }
        }
        on_step(&next, &stats);
        state = next;
        history.push(HistoryEntry::of(&state));
    };
    Ok(RunOutcome {
        state,
        history,
        stop: reason,
    })
}
