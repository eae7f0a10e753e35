//! Counter predicates shared by the waiting states.

use crate::kernel::Counters;

/// `NextUnsafe`: the clockwise edge was present for at least one round of
/// the wait.
pub fn predicate_next_unsafe(c: &Counters) -> bool {
    c.etime > c.emtime_c
}

/// `FailedReport[Retroguard]` over an explicit missing-edge window.
pub fn failed_report(missing_rounds: u64, reports: u32, tnodes: u64) -> bool {
    missing_rounds > 2 * ((reports as u64 + 1) + tnodes)
}

/// `FailedReport[Retroguard]` read off a counter record, with
/// `#Meets[Retroguard]` for the given retroguard.
pub fn predicate_failed_report(c: &Counters, retroguard: usize) -> bool {
    failed_report(c.emtime_c, c.meets[retroguard], c.tnodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wait(etime: u64, emtime_c: u64) -> Counters {
        Counters {
            ttime: etime,
            etime,
            emtime_c,
            ..Counters::default()
        }
    }

    #[test]
    fn next_unsafe() {
        assert!(!predicate_next_unsafe(&wait(3, 3)));
        assert!(predicate_next_unsafe(&wait(2, 0)));
        assert!(!predicate_next_unsafe(&wait(0, 0)));
    }

    fn leader(meets: u32, tnodes: u64, emtime_c: u64) -> Counters {
        Counters {
            ttime: emtime_c,
            etime: emtime_c,
            emtime_c,
            tnodes,
            meets: [0, meets, 0],
            ..Counters::default()
        }
    }

    #[test]
    fn failed_report_boundary() {
        assert!(!predicate_failed_report(&leader(0, 5, 12), 1));
        assert!(predicate_failed_report(&leader(0, 5, 13), 1));
        assert!(predicate_failed_report(&leader(2, 0, 7), 1));
    }
}
