use crate::error::{Error, Result};
use crate::model::DeadlineSpec;
use crate::statespace::LayeredStateGraph;

use super::{
    LAMBDA_GRID, Lambda, LambdaSolution, Schedule, SearchPhase, SolveReport, dp_fixed_lambda, keep_best,
};

/// Bracket doubling stops at `LAMBDA_GRID << MAX_DOUBLINGS`.
pub(super) const MAX_DOUBLINGS: u32 = 32;
pub(super) const MAX_BISECTIONS: u32 = 64;

pub(super) struct Search<'a> {
    pub graph: &'a LayeredStateGraph,
    pub deadline: &'a DeadlineSpec,
    pub report: SolveReport,
    pub best: Option<(Schedule, Lambda, i128)>,
}

impl<'a> Search<'a> {
    pub fn new(graph: &'a LayeredStateGraph, deadline: &'a DeadlineSpec) -> Self {
        Search {
            graph,
            deadline,
            report: SolveReport::default(),
            best: None,
        }
    }

    pub fn run(&mut self, phase: SearchPhase, lambda: Lambda) -> LambdaSolution {
        let sol = dp_fixed_lambda(self.graph, lambda, self.deadline);
        self.report.record(phase, &sol);
        keep_best(&mut self.best, &sol);
        sol
    }

    /// Grid point `k` feasible?
    pub fn probe(&mut self, phase: SearchPhase, k: u64) -> bool {
        self.run(phase, Lambda::grid(k)).schedule.feasible()
    }

    /// Given `lo` infeasible (or 0) and `hi` feasible grid points, bisect.
    pub fn bisect(&mut self, mut lo: u64, mut hi: u64) {
        let mut iters = 0;
        while hi - lo > 1 && iters < MAX_BISECTIONS {
            let mid = lo + (hi - lo) / 2;
            if self.probe(SearchPhase::Bisect, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            iters += 1;
        }
    }

    /// Double from `start` until feasible; returns the bracket, or `None`
    /// when the cap is reached without a feasible point.
    pub fn bracket(&mut self, start: u64) -> Option<(u64, u64)> {
        let cap = LAMBDA_GRID << MAX_DOUBLINGS;
        let mut lo = 0;
        let mut k = start.max(1);
        loop {
            if self.probe(SearchPhase::Bracket, k) {
                return Some((lo, k));
            }
            if k >= cap {
                return None;
            }
            lo = k;
            k = (k * 2).min(cap);
        }
    }

    pub fn finish(mut self) -> (Schedule, SolveReport) {
        let (schedule, lambda, weighted) = self.best.expect("a feasible schedule was seen");
        self.report.chosen_lambda = Some(lambda);
        self.report.chosen_weighted = Some(weighted);
        (schedule, self.report)
    }
}

/// Fail with the minimum achievable latency unless the fastest schedule
/// meets the deadline.
pub(super) fn check_feasible(search: &mut Search) -> Result<()> {
    let fastest = search.run(SearchPhase::Probe, Lambda::INFINITY);
    if fastest.schedule.feasible() {
        Ok(())
    } else {
        Err(Error::Infeasible {
            min_latency: fastest.schedule.t_infer,
            t_max: search.deadline.t_max,
        })
    }
}

/// Parametric λ search for the deadline-constrained minimum-energy schedule.
///
/// λ = 0 is tried first and returned if feasible. Otherwise λ doubles from
/// 1 fJ/ps until feasible, then bisects on the `2^-24` grid. The best
/// feasible schedule seen at any λ is returned.
pub fn solve_lambda_search(graph: &LayeredStateGraph, deadline: &DeadlineSpec) -> Result<(Schedule, SolveReport)> {
    let mut s = Search::new(graph, deadline);
    if s.run(SearchPhase::Initial, Lambda::ZERO).schedule.feasible() {
        return Ok(s.finish());
    }
    check_feasible(&mut s)?;
    if let Some((lo, hi)) = s.bracket(LAMBDA_GRID) {
        s.bisect(lo, hi);
    }
    Ok(s.finish())
}
