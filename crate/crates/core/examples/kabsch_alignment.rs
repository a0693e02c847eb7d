//! Recover a planted rotation with Kabsch, then align a rotated, shuffled
//! copy of a featured point set with the full OMT solver.

use geomflow::alignment::{kabsch, solve_omt};
use geomflow::data::{make_dataset, TemplateSpec};
use geomflow::geometry::{apply_permutation, apply_rigid, project_zero_com, random_rotation, Permutation, PointSet, Translation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> geomflow::Result<()> {
    let g = project_zero_com(&make_dataset(&TemplateSpec::default(), 1)?[0]);
    let r0 = random_rotation(3);
    let rotated = apply_rigid(&g, &r0, &Translation::default());

    let r = kabsch(rotated.coords(), g.coords())?;
    println!("planted rotation recovered to {:.2e} (Frobenius)", r.frobenius_distance(&r0.transpose()));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let shuffled = apply_permutation(&rotated, &Permutation::random(g.n(), &mut rng))?;
    for iters in [1, 50] {
        let s = solve_omt(&shuffled, &g, 0.5, iters)?;
        println!("max_iters {iters:>2}: cost {:.3e} after {} iterations", s.cost, s.iterations);
    }
    Ok(())
}
