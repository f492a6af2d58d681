use blockeig::theory::{
    check_3x3, fuzz_decomp, fuzz_main, fuzz_perturbation, fuzz_rate, main_sweep, reproduce_3x3, FuzzSummary,
    MainInstance,
};

use crate::{Outcome, Suite, TheoryArgs};

/// ε_exp values of the main-bound scaling sweep.
const SWEEP_EPS: [f64; 3] = [1e-5, 1e-4, 1e-3];

fn example3x3() -> Result<bool, String> {
    let ex = reproduce_3x3().map_err(|e| e.to_string())?;
    println!("rho1 = {:.4e}", ex.rho1);
    println!("rho_power = {:.4e}", ex.rho_power);
    println!("rho2 = {:.4e}", ex.rho2);
    println!("asymptotic = {:.4e}", ex.asymptotic);
    let failed: Vec<_> = check_3x3(&ex).into_iter().filter(|c| !c.holds).collect();
    if failed.is_empty() {
        println!("example3x3: all published values reproduced");
        Ok(true)
    } else {
        println!("{}", serde_json::to_string_pretty(&failed).map_err(|e| e.to_string())?);
        Ok(false)
    }
}

fn report(summary: &FuzzSummary) -> Result<bool, String> {
    println!(
        "{}: trials={} passed={} inconclusive={} failures={} worst_slack={:.3e}",
        summary.suite,
        summary.trials,
        summary.passed,
        summary.inconclusive,
        summary.failures.len(),
        summary.worst_slack
    );
    if !summary.failures.is_empty() {
        println!("{}", serde_json::to_string_pretty(&summary.failures).map_err(|e| e.to_string())?);
    }
    Ok(summary.holds())
}

fn sweep(seed: u64) -> Result<bool, String> {
    let inst = MainInstance::generate(seed, 30, 3, 6).map_err(|e| e.to_string())?;
    let exact = inst.check(0.0).map_err(|e| e.to_string())?;
    let s = main_sweep(&inst, &SWEEP_EPS).map_err(|e| e.to_string())?;
    println!(
        "main sweep: rate(eps=0)={:.6e} floor={:.6e} contamination_slope={:.4}",
        exact.report.measured, exact.floor, s.slope
    );
    Ok(exact.report.holds && s.reports.iter().all(|r| r.holds))
}

pub fn run(args: &TheoryArgs) -> Result<Outcome, String> {
    let (trials, seed) = (args.trials, args.seed);
    let mut ok = true;
    let want = |s: Suite| args.suite == s || args.suite == Suite::All;
    if want(Suite::Example3x3) {
        ok &= example3x3()?;
    }
    if want(Suite::Rate) {
        ok &= report(&fuzz_rate(trials, seed))?;
    }
    if want(Suite::Decomp) {
        ok &= report(&fuzz_decomp(trials, seed))?;
    }
    if want(Suite::Perturb) {
        ok &= report(&fuzz_perturbation(trials, seed))?;
    }
    if want(Suite::Main) {
        ok &= report(&fuzz_main(trials, seed))?;
        if trials > 0 {
            ok &= sweep(seed)?;
        }
    }
    Ok(if ok { Outcome::Ok } else { Outcome::Violation })
}
