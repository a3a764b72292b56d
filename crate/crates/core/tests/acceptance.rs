use std::process::ExitCode;
use std::time::Instant;

use yamabe_glue::verify;

type Check = fn() -> verify::Criterion;

const SEED: u64 = 7;

fn main() -> ExitCode {
    let checks: [Check; 12] = [
        verify::fowler_energy,
        verify::homoclinic_profile,
        verify::period_limit,
        verify::neck_expansion,
        verify::mode_recovery,
        || verify::uniform_estimates(SEED),
        verify::dn_diagonal,
        || verify::remainder_scaling(SEED),
        verify::trivial_matching,
        verify::nondegeneracy,
        verify::radial_glue,
        || verify::conformal_samples(SEED),
    ];
    let mut failures = 0;
    for check in checks {
        let start = Instant::now();
        let c = check();
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2} {}: {} ({:.1?})", c.id, c.name, c.detail, start.elapsed());
        failures += usize::from(!c.passed);
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
