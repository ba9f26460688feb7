use std::cmp::Ordering;
use std::collections::BTreeSet;

/// A unit eligible for matching: firm, matching group (year) and p-score.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub firm_id: String,
    pub group: i32,
    pub pscore: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Largest admissible p-score distance.
    pub caliper: Option<f64>,
    /// Allow a control to serve several treated firms.
    pub with_replacement: bool,
    /// Drop treated firms whose p-score lies outside the control range.
    pub common_support: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            caliper: None,
            with_replacement: false,
            common_support: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub treated: String,
    pub control: String,
    pub group: i32,
    pub treated_pscore: f64,
    pub control_pscore: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSample {
    pub pairs: Vec<Pair>,
    pub caliper: Option<f64>,
    /// Range of control p-scores.
    pub common_support: (f64, f64),
    /// Treated firms outside the common support.
    pub off_support: Vec<String>,
    /// Treated firms on support left without a control (none available in
    /// their group, or none within the caliper).
    pub unmatched: Vec<String>,
}

/// Greedy one-to-one nearest-neighbour matching within groups.
///
/// Treated units are processed in descending p-score order (ties by
/// firm_id); each takes the closest available control of its group, ties
/// going to the lowest control firm_id.
pub fn nn_match(treated: &[Candidate], controls: &[Candidate], opts: &MatchOptions) -> MatchedSample {
    let lo = controls.iter().map(|c| c.pscore).fold(f64::INFINITY, f64::min);
    let hi = controls.iter().map(|c| c.pscore).fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<&Candidate> = treated.iter().collect();
    order.sort_by(|a, b| b.pscore.total_cmp(&a.pscore).then_with(|| a.firm_id.cmp(&b.firm_id)));
    let mut pool: Vec<&Candidate> = controls.iter().collect();
    pool.sort_by(|a, b| a.firm_id.cmp(&b.firm_id));
    let mut used: BTreeSet<&str> = BTreeSet::new();

    let mut out = MatchedSample {
        pairs: Vec::new(),
        caliper: opts.caliper,
        common_support: (lo, hi),
        off_support: Vec::new(),
        unmatched: Vec::new(),
    };
    for t in order {
        if opts.common_support && !(t.pscore >= lo && t.pscore <= hi) {
            out.off_support.push(t.firm_id.clone());
            continue;
        }
        let best = pool
            .iter()
            .filter(|c| c.group == t.group && (opts.with_replacement || !used.contains(c.firm_id.as_str())))
            .min_by(|a, b| {
                let da = (a.pscore - t.pscore).abs();
                let db = (b.pscore - t.pscore).abs();
                da.partial_cmp(&db).unwrap_or(Ordering::Equal).then_with(|| a.firm_id.cmp(&b.firm_id))
            });
        match best {
            Some(c) if opts.caliper.map_or(true, |cal| (c.pscore - t.pscore).abs() <= cal) => {
                used.insert(c.firm_id.as_str());
                out.pairs.push(Pair {
                    treated: t.firm_id.clone(),
                    control: c.firm_id.clone(),
                    group: t.group,
                    treated_pscore: t.pscore,
                    control_pscore: c.pscore,
                    distance: (c.pscore - t.pscore).abs(),
                });
            }
            _ => out.unmatched.push(t.firm_id.clone()),
        }
    }
    out
}
