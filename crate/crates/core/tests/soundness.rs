mod common;

use anonaudit_core::enumerator::EnumerationLimits;
use common::{check, suite_cases};

#[test]
fn true_counts_are_always_feasible() {
    let limits = EnumerationLimits::default();
    let mut exhausted = 0;
    for case in suite_cases(24) {
        let r = check(&case, &limits);
        assert!(r.soundness.is_empty(), "{:#?}", r.soundness);
        assert!(r.ratio_below_one.is_empty(), "{:#?}", r.ratio_below_one);
        assert!(r.k_anonymity.is_empty(), "{:#?}", r.k_anonymity);
        assert!(r.partition.is_empty(), "{:#?}", r.partition);
        assert!(r.replay.is_empty(), "{:#?}", r.replay);
        assert!(r.fpso.is_empty(), "{:#?}", r.fpso);
        assert!(r.predicate_errors.is_empty(), "{:#?}", r.predicate_errors);
        exhausted += r.exhausted;
    }
    assert!(exhausted > 0);
}
