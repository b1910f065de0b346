use linstate::models::linear_state_monad_check;

#[test]
fn linear_use_state_monad_counts() {
    for (s, a, want) in [(1, 1, 1), (1, 3, 3), (2, 2, 16), (2, 3, 36), (3, 2, 216)] {
        let r = linear_state_monad_check(s, a).unwrap();
        assert_eq!(r.hom_count, want, "{r:?}");
        assert_eq!(r.t_count, want, "{r:?}");
        assert!(r.ok(), "{r:?}");
    }
}
