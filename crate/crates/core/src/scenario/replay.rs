use super::Scenario;
use crate::engine::{run, SimError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayVerdict {
    Pass { lines: usize },
    /// `line` is 1-based; a missing line renders as the empty string.
    Fail {
        line: usize,
        first: String,
        second: String,
    },
}

impl ReplayVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ReplayVerdict::Pass { .. })
    }
}

/// Runs `scenario` twice and byte-compares the rendered logs.
pub fn replay_check(scenario: &Scenario) -> Result<ReplayVerdict, SimError> {
    let first = run(scenario)?.log.render();
    let second = run(scenario)?.log.render();
    Ok(compare_logs(&first, &second))
}

pub fn compare_logs(first: &str, second: &str) -> ReplayVerdict {
    if first == second {
        return ReplayVerdict::Pass {
            lines: first.lines().count(),
        };
    }
    let mut a = first.split_inclusive('\n');
    let mut b = second.split_inclusive('\n');
    let mut line = 1;
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                let show = |s: Option<&str>| s.unwrap_or_default().trim_end_matches('\n').to_owned();
                return ReplayVerdict::Fail {
                    line,
                    first: show(x),
                    second: show(y),
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference() {
        assert_eq!(compare_logs("a\nb\n", "a\nb\n"), ReplayVerdict::Pass { lines: 2 });
        assert_eq!(
            compare_logs("a\nb\nc\n", "a\nx\nc\n"),
            ReplayVerdict::Fail {
                line: 2,
                first: "b".into(),
                second: "x".into()
            }
        );
        assert_eq!(
            compare_logs("a\n", "a\nb\n"),
            ReplayVerdict::Fail {
                line: 2,
                first: String::new(),
                second: "b".into()
            }
        );
        assert!(!compare_logs("a", "a\n").passed());
    }
}
