// Dev pilot: timing and behavior of the presets. (Removed before release.)
use kssm_core::diagnostics::NullSink;
use kssm_core::scenario::{presets, run_scenario};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    for name in &args {
        // custom2d:extent,width,amp,floor,T[,mu]
        let mut scn = if let Some(spec) = name.strip_prefix("custom2d:") {
            let p: Vec<f64> = spec.split(',').map(|x| x.parse().unwrap()).collect();
            let mut scn = presets::by_name("blowup2d").unwrap();
            scn.grid = kssm_core::grid::Grid::new_2d(p[0], p[0], 128, 128).unwrap();
            scn.initial = kssm_core::model::InitialConditionSpec::GaussianBump {
                center: vec![p[0] / 2.0, p[0] / 2.0],
                width: p[1],
                amplitude: p[2],
                floor: p[3],
            };
            scn.horizon = p[4];
            if let Some(&mu) = p.get(5) {
                scn.source = kssm_core::model::SourceSpec::LogPower {
                    lambda: 1.0,
                    alpha: 1.0,
                    mu,
                };
            }
            scn
        } else {
            presets::by_name(name.split('=').next().unwrap()).expect("preset")
        };
        // optional overrides: name=horizon
        if let Some((_, h)) = name.split_once('=') {
            scn.horizon = h.parse().unwrap();
        }
        let t0 = std::time::Instant::now();
        let out = run_scenario(&scn, &mut NullSink).unwrap();
        let el = t0.elapsed().as_secs_f64();
        let s = &out.summary;
        println!(
            "{:14}  {:?}  steps={:8}  t={:6.2}  u_max_peak={:10.3e}  v_max_peak={:8.3}  u_max_final={:10.3e}  defect={:.2e}  wall={:6.1}s",
            scn.name, s.classification, s.steps, s.final_time, s.peak.u_max, s.peak.v_max,
            out.records.last().unwrap().u_max, s.mass_law_max_defect, el
        );
        if let Some(c) = &s.constants {
            println!(
                "    beta1={:.4} vstar={:.4} sstar={:?} glo={:.4} ghi={:.4} kg={:.4}",
                c.beta1, c.vstar, c.sstar, c.gamma_lo, c.gamma_hi, c.k_gamma
            );
        }
        let n = out.records.len();
        for r in out.records.iter().step_by((n / 12).max(1)) {
            println!(
                "    t={:8.3} mass={:9.4} u_max={:10.4e} v_max={:8.4} entropy={:9.4} dirichlet={:9.4} uf={:9.4} ki={:?}",
                r.t, r.mass, r.u_max, r.v_max, r.entropy, r.dirichlet, r.uf_int,
                r.ki_residual.map(|x| format!("{x:.2e}"))
            );
        }
    }
}
