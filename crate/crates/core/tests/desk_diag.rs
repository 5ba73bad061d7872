use crowdnav_core::crowd::scenario::ScenarioConfig;
use crowdnav_core::metrics::{compute_metrics, evaluate_policy, EvalProtocol};
use crowdnav_core::runner::{RunnerConfig, RobotPolicy};
use crowdnav_core::trainer::{train_crowd, TrainerConfig};
use std::time::Instant;

#[test]
fn diag() {
    let scenario = ScenarioConfig::desk();
    let runner = RunnerConfig::default();
    let tcfg = TrainerConfig {
        cost_limit: 0.4,
        total_steps: 1_000_000,
        ..TrainerConfig::desk()
    };
    let t0 = Instant::now();
    let out = train_crowd(&scenario, &runner, &tcfg, 0).unwrap();
    println!("100k steps took {:.1}s", t0.elapsed().as_secs_f64());
    for r in out.curves.iter().step_by(20) {
        println!("it {:3} reward {:7.3} cost {:7.3} lambda {:.3}", r.iteration, r.mean_reward, r.mean_cost, r.lambda);
    }
    let t1 = Instant::now();
    let policy = RobotPolicy::Network(Box::new(out.params));
    let proto = EvalProtocol { episodes_per_seed: 50, test_seeds: vec![0, 1, 2] };
    let traces = evaluate_policy(&policy, &scenario, &runner, &proto).unwrap();
    let m = compute_metrics(&traces).unwrap();
    println!("eval took {:.1}s; SR {:.2} CR {:.2} TR {:.2} NT {:?} ITR {:.3}", t1.elapsed().as_secs_f64(), m.sr, m.cr, m.tr, m.nt, m.itr);
}
