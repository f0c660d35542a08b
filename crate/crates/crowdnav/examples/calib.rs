use crowdnav::crowd::CrowdModelParams;
use crowdnav::engine::TrialConfig;
use crowdnav::experiments::{crowd_baseline, quartiles};
use crowdnav::{Formation, Scenario, StrategyKind};
use rayon::prelude::*;

fn probe(crowd: CrowdModelParams, scenario: Scenario, density: f64, n_robots: usize, seeds: u64) {
    for strategy in [StrategyKind::Greedy, StrategyKind::Platoon, StrategyKind::AdaptivePlatoon] {
        let results: Vec<_> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let config = TrialConfig {
                    scenario,
                    strategy,
                    density,
                    n_robots,
                    formation: Formation::Line,
                    seed,
                    crowd,
                    ..Default::default()
                };
                crowdnav::run_trial(&config).unwrap()
            })
            .collect();
        let times: Vec<f64> = results.iter().filter_map(|r| r.time_to_goal).collect();
        let ints: Vec<f64> = results.iter().map(|r| r.interceptions as f64).collect();
        let timeouts = results.iter().filter(|r| r.timeout).count();
        println!(
            "{:?} rho={density} n={n_robots} {:<17} time {} int {:8.1} to {timeouts:2}",
            scenario,
            strategy.label(),
            quartiles(&times).map(|q| format!("{:7.1}", q.1)).unwrap_or("    inf".into()),
            quartiles(&ints).map(|q| q.1).unwrap_or(f64::NAN),
        );
    }
}

fn main() {
    let crowd = CrowdModelParams { desired_speed: 2.4, pair_strength: 3.5, ..Default::default() };
    let seeds: Vec<u64> = (0..10).collect();
    for scenario in [Scenario::PerpendicularFlow, Scenario::CounterFlow] {
        let rows =
            crowd_baseline(scenario, &[0.1, 0.2, 0.3, 0.4, 0.5], &seeds, 300.0, &crowd, None)
                .unwrap();
        print!("{:?} baseline:", scenario);
        for r in rows {
            print!(
                " {:.1}:{}(f{})",
                r.density,
                r.flow_median.map(|f| format!("{f:+.3}")).unwrap_or("fail".into()),
                r.failures
            );
        }
        println!();
    }
    probe(crowd, Scenario::Passive, 0.1, 10, 10);
    probe(crowd, Scenario::Passive, 0.3, 10, 10);
    let t0 = std::time::Instant::now();
    let config = TrialConfig {
        scenario: Scenario::CounterFlow,
        strategy: StrategyKind::AdaptivePlatoon,
        density: 0.3,
        n_robots: 200,
        seed: 0,
        crowd,
        ..Default::default()
    };
    let r = crowdnav::run_trial(&config).unwrap();
    println!(
        "200-robot: steps={} timeout={} ttg={:?} int={} wall={:.1}s",
        r.steps, r.timeout, r.time_to_goal, r.interceptions, t0.elapsed().as_secs_f64()
    );
}
