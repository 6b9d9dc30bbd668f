use pdmp::diagnostics::quantile;
use pdmp::{tcp_scenario, PipelineSettings};

#[test]
#[ignore]
fn tcp_spread() {
    let s = PipelineSettings::default();
    let target = [0.75, 0.5];
    let mut lambdas = Vec::new();
    for r in 0..20u64 {
        let rep = tcp_scenario(&s, 10_000, 1_000, 400 + r, &target).unwrap();
        let best = rep.selection.best_node();
        let lam = rep.estimate.lambda.value();
        lambdas.push(lam);
        println!(
            "seed {}: lambda {lam:.4}  f {:.4} g {:.4}  tau* {:.3} xi1 {:.3}  aG {:.2} aF {:.2} bF {:.2}  feas {}",
            400 + r,
            rep.estimate.f_hat,
            rep.estimate.g_hat,
            best.tau,
            best.xi[0],
            rep.alpha_g,
            rep.alpha_f,
            rep.beta_f,
            rep.selection.feasibility.feasible,
        );
    }
    let med = quantile(&lambdas, 0.5);
    println!("median {med:.4}");
}
