use phasefield::energies::{EnergyContext, EnergyVariant};
use phasefield::fem::{assemble, Field};
use phasefield::mesh::{generate_uniform, Rect};
use phasefield::solvers::{lbfgs_minimize, LbfgsConfig};
use phasefield::steppers::ac::{step_mcn, AcState};
use phasefield::steppers::SolverConfig;
use phasefield::solvers::NewtonConfig;

fn main() {
    let eps = 0.02_f64;
    let e2 = eps * eps;
    let space = assemble(generate_uniform(32, 32, Rect::symmetric()).unwrap()).unwrap();
    let u0 = space
        .interpolate_coords(|x, y| ((x * x + y * y).sqrt() - 0.6) / (std::f64::consts::SQRT_2 * eps))
        .map(f64::tanh);
    let solver = SolverConfig {
        newton: NewtonConfig { tol: 1e-11, linear_tol: 1e-12, ..NewtonConfig::default() },
        ..SolverConfig::default()
    };
    for factor in [1.0, 10.0, 100.0] {
        let k = factor * 2.0 * e2;
        let mut state = AcState::new(u0.clone());
        for step in 0..10 {
            match step_mcn(&space, eps, &solver, &state, k) {
                Ok((next, stats)) => { 
                    if step == 0 { println!("k {k}: step 0 ok (newton {} lbfgs {:?})", stats.newton_iters, stats.lbfgs_iters); }
                    state = next;
                }
                Err(e) => {
                    println!("k {k} step {step}: ERR {e}");
                    // probe lbfgs state at failure
                    let ctx = EnergyContext::new(&space, eps, k, state.u.clone(), EnergyVariant::AcMcn).unwrap();
                    let energy = |u: &Field| ctx.step_energy(u);
                    let gradient = |u: &Field| ctx.step_gradient(u);
                    let inner = |a: &Field, b: &Field| ctx.inner(a, b);
                    match lbfgs_minimize(&energy, &gradient, &inner, &state.u, None, &LbfgsConfig::default()) {
                        Ok(o) => println!("  lbfgs ok conv {} floor {} gn {:.3e} E {:.6}", o.converged, o.hit_noise_floor, o.grad_norms.last().unwrap(), o.energies.last().unwrap()),
                        Err(e2) => {
                            println!("  lbfgs ERR {e2}");
                        }
                    }
                    break;
                }
            }
        }
    }
}
