mod common;

use chrforge::plancompile::OptFlags;
use common::random_program::{random_goal, random_program, run_checked, Ending};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_programs_respect_the_operational_semantics(seed in any::<u64>(), flag_bits in 0u8..64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let prog = random_program(&mut rng);
        let goal = random_goal(&mut rng, &prog);
        let flags = OptFlags::combinations().nth(flag_bits as usize).unwrap();
        run_checked(&prog, &goal, OptFlags::all()).map_err(TestCaseError::fail)?;
        run_checked(&prog, &goal, flags).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn most_random_runs_reach_quiescence() {
    let mut rng = StdRng::seed_from_u64(7);
    let mut quiescent = 0;
    for _ in 0..100 {
        let prog = random_program(&mut rng);
        let goal = random_goal(&mut rng, &prog);
        if run_checked(&prog, &goal, OptFlags::all()).unwrap() == Ending::Quiescent {
            quiescent += 1;
        }
    }
    assert!(quiescent >= 50, "only {quiescent} of 100 runs quiesced");
}
