//! Directed feedback graphs over the action set.
//!
//! Playing action `y'` reveals the zero-one loss of every action in
//! `out(y')`. Actions are 0-based inside the crate; the text file format and
//! the CLI use 1-based identifiers.
//!
//! A graph is only usable once [`FeedbackGraph::validate`] has run. Validation
//! adds the missing edge to every node that has exactly `n_actions - 1`
//! out-edges (knowing all but one zero-one loss reveals the last one) and then
//! rejects graphs with a node that nobody observes.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest graph accepted by [`exact_domination_number`].
pub const EXACT_DOMINATION_MAX: usize = 16;

/// The standard graphs used throughout the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    FullInformation,
    Bandit,
    AppleTasting,
    LabelEfficient,
    SpamFilterMulticlass,
}

impl GraphKind {
    pub const ALL: [GraphKind; 5] = [
        GraphKind::FullInformation,
        GraphKind::Bandit,
        GraphKind::AppleTasting,
        GraphKind::LabelEfficient,
        GraphKind::SpamFilterMulticlass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::FullInformation => "full",
            GraphKind::Bandit => "bandit",
            GraphKind::AppleTasting => "apple",
            GraphKind::LabelEfficient => "label-efficient",
            GraphKind::SpamFilterMulticlass => "spam-filter",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" | "full-information" => Ok(GraphKind::FullInformation),
            "bandit" => Ok(GraphKind::Bandit),
            "apple" | "apple-tasting" => Ok(GraphKind::AppleTasting),
            "label-efficient" => Ok(GraphKind::LabelEfficient),
            "spam-filter" | "spam-filter-multiclass" => Ok(GraphKind::SpamFilterMulticlass),
            _ => Err(Error::UnknownGraphKind(s.to_string())),
        }
    }
}

/// An unvalidated graph description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGraph {
    pub n_actions: usize,
    /// `out[y]` lists the actions observed when `y` is played.
    pub out: Vec<Vec<usize>>,
    /// Actions that can be true labels. `None` means every action.
    pub label_actions: Option<Vec<usize>>,
}

/// A validated feedback graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackGraph {
    n_actions: usize,
    adjacency: Vec<bool>,
    out: Vec<Vec<usize>>,
    label_actions: Vec<usize>,
    kind: Option<GraphKind>,
}

impl FeedbackGraph {
    /// Checks a raw graph, applies the missing-edge augmentation and verifies
    /// that every action has an in-edge.
    pub fn validate(raw: RawGraph) -> Result<Self> {
        let n = raw.n_actions;
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if raw.out.len() > n {
            return Err(Error::ActionOutOfRange {
                action: raw.out.len() - 1,
                n_actions: n,
            });
        }
        let mut adjacency = vec![false; n * n];
        for (from, targets) in raw.out.iter().enumerate() {
            for &to in targets {
                if to >= n {
                    return Err(Error::ActionOutOfRange {
                        action: to,
                        n_actions: n,
                    });
                }
                adjacency[from * n + to] = true;
            }
        }
        for from in 0..n {
            let row = &mut adjacency[from * n..(from + 1) * n];
            let degree = row.iter().filter(|&&e| e).count();
            if degree + 1 == n {
                row.iter_mut().for_each(|e| *e = true);
            }
        }
        for to in 0..n {
            if !(0..n).any(|from| adjacency[from * n + to]) {
                return Err(Error::Unobservable(to));
            }
        }

        let label_actions = match raw.label_actions {
            None => (0..n).collect(),
            Some(mut labels) => {
                labels.sort_unstable();
                labels.dedup();
                if labels.is_empty() {
                    return Err(Error::NoLabelActions);
                }
                if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
                    return Err(Error::ActionOutOfRange {
                        action: bad,
                        n_actions: n,
                    });
                }
                labels
            }
        };

        let out = (0..n)
            .map(|from| (0..n).filter(|&to| adjacency[from * n + to]).collect())
            .collect();
        Ok(Self {
            n_actions: n,
            adjacency,
            out,
            label_actions,
            kind: None,
        })
    }

    /// Builds one of the standard graphs. `n_classes` is the number of
    /// possible labels; the label-efficient graph adds one query action.
    pub fn standard(kind: GraphKind, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "a {kind} graph needs at least 2 classes, got {n_classes}"
            )));
        }
        let all = |k: usize| (0..k).collect::<Vec<_>>();
        let raw = match kind {
            GraphKind::FullInformation => RawGraph {
                n_actions: n_classes,
                out: vec![all(n_classes); n_classes],
                label_actions: None,
            },
            GraphKind::Bandit => RawGraph {
                n_actions: n_classes,
                out: (0..n_classes).map(|y| vec![y]).collect(),
                label_actions: None,
            },
            GraphKind::AppleTasting => {
                if n_classes != 2 {
                    return Err(Error::InvalidParameter(format!(
                        "apple tasting has exactly 2 classes, got {n_classes}"
                    )));
                }
                RawGraph {
                    n_actions: 2,
                    out: vec![vec![0, 1], vec![]],
                    label_actions: None,
                }
            }
            GraphKind::LabelEfficient => {
                let mut out = vec![Vec::new(); n_classes];
                out.push(all(n_classes));
                RawGraph {
                    n_actions: n_classes + 1,
                    out,
                    label_actions: Some(all(n_classes)),
                }
            }
            GraphKind::SpamFilterMulticlass => {
                let mut out = vec![Vec::new(); n_classes];
                out[0] = all(n_classes);
                RawGraph {
                    n_actions: n_classes,
                    out,
                    label_actions: None,
                }
            }
        };
        let mut graph = Self::validate(raw)?;
        graph.kind = Some(kind);
        Ok(graph)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of distinct labels the environment may draw.
    pub fn n_classes(&self) -> usize {
        self.label_actions.len()
    }

    pub fn kind(&self) -> Option<GraphKind> {
        self.kind
    }

    pub fn label_actions(&self) -> &[usize] {
        &self.label_actions
    }

    pub fn is_label_action(&self, y: usize) -> bool {
        self.label_actions.binary_search(&y).is_ok()
    }

    /// Out-neighbourhood of `action`, sorted ascending.
    pub fn out(&self, action: usize) -> &[usize] {
        &self.out[action]
    }

    /// True when playing `from` reveals the loss of `to`.
    pub fn observes(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.n_actions + to]
    }

    /// Actions whose out-neighbourhood is the whole action set.
    pub fn revealing_set(&self) -> Vec<usize> {
        (0..self.n_actions)
            .filter(|&y| self.out[y].len() == self.n_actions)
            .collect()
    }

    /// Greedy dominating set: repeatedly takes the action covering the most
    /// uncovered actions, lowest index first on ties.
    pub fn greedy_dominating_set(&self) -> Vec<usize> {
        let n = self.n_actions;
        let mut covered = vec![false; n];
        let mut remaining = n;
        let mut chosen = Vec::new();
        while remaining > 0 {
            let (best, gain) = (0..n)
                .map(|y| (y, self.out[y].iter().filter(|&&z| !covered[z]).count()))
                .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            debug_assert!(gain > 0, "validated graphs are always dominated");
            for &z in &self.out[best] {
                if !covered[z] {
                    covered[z] = true;
                    remaining -= 1;
                }
            }
            chosen.push(best);
        }
        chosen.sort_unstable();
        chosen
    }

    /// True when every action lies in the out-neighbourhood of some member
    /// of `set`.
    pub fn dominates(&self, set: &[usize]) -> bool {
        (0..self.n_actions).all(|y| set.iter().any(|&s| self.observes(s, y)))
    }

    /// Revealing set, greedy dominating set and its size.
    pub fn summary(&self) -> GraphSummary {
        let dominating_set = self.greedy_dominating_set();
        GraphSummary {
            revealing_set: self.revealing_set(),
            rho: dominating_set.len(),
            dominating_set,
        }
    }

    /// Short name used in CSV output.
    pub fn name(&self) -> String {
        self.kind
            .map(|k| k.as_str().to_string())
            .unwrap_or_else(|| "custom".to_string())
    }

    /// Parses the text format: first line `n_actions`, second line the
    /// label actions, then one `y: y1 y2 ...` line per action with
    /// out-edges. All identifiers are 1-based. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_id = |line: usize, tok: &str| -> Result<usize> {
            let v: usize = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{tok}` is not a positive integer"),
            })?;
            v.checked_sub(1).ok_or(Error::Parse {
                line,
                msg: "action identifiers start at 1".into(),
            })
        };

        let (line_no, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing action count".into(),
        })?;
        let n_actions: usize = first.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("`{first}` is not an action count"),
        })?;

        let (line_no, second) = lines.next().ok_or(Error::Parse {
            line: line_no + 1,
            msg: "missing label action line".into(),
        })?;
        let labels = second
            .split_whitespace()
            .map(|t| parse_id(line_no, t))
            .collect::<Result<Vec<_>>>()?;

        let mut out = vec![Vec::new(); n_actions];
        for (line_no, line) in lines {
            let (head, tail) = line.split_once(':').ok_or(Error::Parse {
                line: line_no,
                msg: "expected `y: y1 y2 ...`".into(),
            })?;
            let from = parse_id(line_no, head.trim())?;
            if from >= n_actions {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("action {} exceeds the action count", from + 1),
                });
            }
            for tok in tail.split_whitespace() {
                out[from].push(parse_id(line_no, tok)?);
            }
        }
        Self::validate(RawGraph {
            n_actions,
            out,
            label_actions: Some(labels),
        })
        .map_err(|e| match e {
            Error::Unobservable(a) => Error::InvalidParameter(format!(
                "action {} has no incoming edge, its outcome can never be observed",
                a + 1
            )),
            other => other,
        })
    }

    /// Inverse of [`FeedbackGraph::parse`]; writes the augmented edge set.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n_actions);
        let labels: Vec<String> = self.label_actions.iter().map(|y| (y + 1).to_string()).collect();
        s.push_str(&labels.join(" "));
        s.push('\n');
        for (y, targets) in self.out.iter().enumerate() {
            s.push_str(&format!("{}:", y + 1));
            for t in targets {
                s.push_str(&format!(" {}", t + 1));
            }
            s.push('\n');
        }
        s
    }
}

/// What the learner needs to know about a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSummary {
    pub revealing_set: Vec<usize>,
    pub dominating_set: Vec<usize>,
    /// Size of `dominating_set`, an upper bound on the domination number.
    pub rho: usize,
}

impl GraphSummary {
    pub fn is_revealing(&self, y: usize) -> bool {
        self.revealing_set.binary_search(&y).is_ok()
    }
}

/// Smallest dominating set size by exhaustive search over subsets in order of
/// increasing size. Only meant as a reference for small graphs.
pub fn exact_domination_number(graph: &FeedbackGraph) -> Result<usize> {
    let n = graph.n_actions();
    if n > EXACT_DOMINATION_MAX {
        return Err(Error::TooManyActions {
            got: n,
            max: EXACT_DOMINATION_MAX,
        });
    }
    let full: u32 = (1u32 << n) - 1;
    let masks: Vec<u32> = (0..n)
        .map(|y| graph.out(y).iter().fold(0u32, |m, &z| m | (1 << z)))
        .collect();
    let mut best = n;
    for subset in 1u32..=full {
        let size = subset.count_ones() as usize;
        if size >= best {
            continue;
        }
        let cover = (0..n)
            .filter(|&y| subset & (1 << y) != 0)
            .fold(0u32, |c, y| c | masks[y]);
        if cover == full {
            best = size;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: usize, out: Vec<Vec<usize>>) -> RawGraph {
        RawGraph {
            n_actions: n,
            out,
            label_actions: None,
        }
    }

    #[test]
    fn bandit_graph_is_left_alone() {
        let g = FeedbackGraph::validate(raw(3, vec![vec![0], vec![1], vec![2]])).unwrap();
        for y in 0..3 {
            assert_eq!(g.out(y), &[y]);
        }
    }

    #[test]
    fn missing_edge_is_added() {
        let g = FeedbackGraph::validate(raw(3, vec![vec![1, 2], vec![1], vec![2]])).unwrap();
        assert_eq!(g.out(0), &[0, 1, 2]);
        assert_eq!(g.out(1), &[1]);
    }

    #[test]
    fn unobserved_node_is_rejected() {
        let err = FeedbackGraph::validate(raw(3, vec![vec![], vec![1], vec![2]])).unwrap_err();
        assert_eq!(err, Error::Unobservable(0));
    }

    #[test]
    fn two_node_bandit_becomes_full_information() {
        // out(y) = {y} has K - 1 = 1 edges, so augmentation completes it.
        let g = FeedbackGraph::validate(raw(2, vec![vec![], vec![1]])).unwrap();
        assert_eq!(g.out(1), &[0, 1]);
        let b = FeedbackGraph::standard(GraphKind::Bandit, 2).unwrap();
        assert_eq!(b.revealing_set(), vec![0, 1]);
    }

    #[test]
    fn out_of_range_edges_are_rejected() {
        let err = FeedbackGraph::validate(raw(2, vec![vec![5], vec![1]])).unwrap_err();
        assert!(matches!(err, Error::ActionOutOfRange { action: 5, .. }));
        assert_eq!(
            FeedbackGraph::validate(raw(0, vec![])).unwrap_err(),
            Error::EmptyGraph
        );
    }

    #[test]
    fn revealing_sets() {
        let full = FeedbackGraph::standard(GraphKind::FullInformation, 5).unwrap();
        assert_eq!(full.revealing_set(), vec![0, 1, 2, 3, 4]);
        let apple = FeedbackGraph::standard(GraphKind::AppleTasting, 2).unwrap();
        assert_eq!(apple.revealing_set(), vec![0]);
        let bandit = FeedbackGraph::standard(GraphKind::Bandit, 4).unwrap();
        assert!(bandit.revealing_set().is_empty());
    }

    #[test]
    fn greedy_sets_on_standard_graphs() {
        let bandit = FeedbackGraph::standard(GraphKind::Bandit, 6).unwrap();
        assert_eq!(bandit.greedy_dominating_set(), (0..6).collect::<Vec<_>>());
        let spam = FeedbackGraph::standard(GraphKind::SpamFilterMulticlass, 6).unwrap();
        assert_eq!(spam.greedy_dominating_set(), vec![0]);
        let apple = FeedbackGraph::standard(GraphKind::AppleTasting, 2).unwrap();
        assert_eq!(apple.greedy_dominating_set(), vec![0]);
        let le = FeedbackGraph::standard(GraphKind::LabelEfficient, 6).unwrap();
        assert_eq!(le.n_actions(), 7);
        assert_eq!(le.label_actions(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(le.greedy_dominating_set(), vec![6]);
        assert_eq!(le.revealing_set(), vec![6]);
    }

    #[test]
    fn exact_numbers() {
        let bandit = FeedbackGraph::standard(GraphKind::Bandit, 5).unwrap();
        assert_eq!(exact_domination_number(&bandit).unwrap(), 5);
        let le = FeedbackGraph::standard(GraphKind::LabelEfficient, 6).unwrap();
        assert_eq!(exact_domination_number(&le).unwrap(), 1);
        let full = FeedbackGraph::standard(GraphKind::FullInformation, 7).unwrap();
        assert_eq!(exact_domination_number(&full).unwrap(), 1);
        let big = FeedbackGraph::standard(GraphKind::Bandit, 17).unwrap();
        assert!(matches!(
            exact_domination_number(&big),
            Err(Error::TooManyActions { got: 17, .. })
        ));
    }

    #[test]
    fn apple_tasting_summary() {
        let s = FeedbackGraph::standard(GraphKind::AppleTasting, 2)
            .unwrap()
            .summary();
        assert_eq!(s.revealing_set, vec![0]);
        assert_eq!(s.dominating_set, vec![0]);
        assert_eq!(s.rho, 1);
        let b = FeedbackGraph::standard(GraphKind::Bandit, 6).unwrap().summary();
        assert_eq!(b.rho, 6);
        assert!(b.revealing_set.is_empty());
        assert!(FeedbackGraph::standard(GraphKind::AppleTasting, 3).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let le = FeedbackGraph::standard(GraphKind::LabelEfficient, 3).unwrap();
        let text = le.to_text();
        assert!(text.starts_with("4\n1 2 3\n"));
        let back = FeedbackGraph::parse(&text).unwrap();
        assert_eq!(back.out(3), le.out(3));
        assert_eq!(back.label_actions(), le.label_actions());

        let g = FeedbackGraph::parse("3\n1 2 3\n# apple-ish\n1: 2 3\n2: 2\n3: 3\n").unwrap();
        assert_eq!(g.out(0), &[0, 1, 2]);
        assert!(matches!(
            FeedbackGraph::parse("2\n1 2\n1 2\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            FeedbackGraph::parse("2\n0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn kind_names_parse() {
        for kind in GraphKind::ALL {
            assert_eq!(kind.as_str().parse::<GraphKind>().unwrap(), kind);
        }
        assert_eq!(
            "spam_filter_multiclass".parse::<GraphKind>().unwrap(),
            GraphKind::SpamFilterMulticlass
        );
        assert!("ring".parse::<GraphKind>().is_err());
    }
}
