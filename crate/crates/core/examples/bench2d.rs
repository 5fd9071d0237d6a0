// Dev bench: per-step cost split for the 2D path. (Removed before release.)
use kssm_core::elliptic::HelmholtzSolver;
use kssm_core::grid::{Field, Grid};
use kssm_core::model::{InitialConditionSpec, MotilitySpec, SourceSpec};
use kssm_core::stepper::{State, StepConfig, Stepper};

fn main() {
    let grid = Grid::new_2d(4.0, 4.0, 128, 128).unwrap();
    let ic = InitialConditionSpec::GaussianBump {
        center: vec![2.0, 2.0],
        width: 0.35,
        amplitude: 52.0,
        floor: 0.1,
    };
    let u0 = kssm_core::model::init_field(&ic, &grid, 0).unwrap();
    let mut solver = HelmholtzSolver::new(grid);
    let t0 = std::time::Instant::now();
    let state = State::initial(u0, &mut solver).unwrap();
    println!("cold solve: {:?}, iters {}", t0.elapsed(), solver.last_iterations());

    let m = MotilitySpec::ExpDecay { chi: 1.0 };
    let mut stepper = Stepper::new(grid, m, SourceSpec::Zero, StepConfig::default()).unwrap();
    let mut a = state.clone();
    let mut b = state.clone();
    // warm up
    for _ in 0..10 {
        stepper.step_into(&a, &mut b, f64::INFINITY).unwrap();
        std::mem::swap(&mut a, &mut b);
    }
    let mut iters = Vec::new();
    let t0 = std::time::Instant::now();
    let n = 300;
    for _ in 0..n {
        stepper.step_into(&a, &mut b, f64::INFINITY).unwrap();
        std::mem::swap(&mut a, &mut b);
        iters.push(stepper.helmholtz().last_iterations());
    }
    let el = t0.elapsed().as_secs_f64();
    let avg_iters: f64 = iters.iter().sum::<usize>() as f64 / n as f64;
    println!("{n} steps in {el:.3}s = {:.2} ms/step, avg CG iters {avg_iters:.1}", 1e3 * el / n as f64);

    // raw solve cost: re-solve same rhs from converged guess vs from scratch
    let t0 = std::time::Instant::now();
    for _ in 0..100 {
        solver.solve(&a.u).unwrap();
    }
    println!("repeat-solve: {:.2} ms, iters {}", t0.elapsed().as_secs_f64() * 10.0, solver.last_iterations());
}
