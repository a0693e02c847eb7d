//! Solve a small assignment problem and compare against enumeration.

use geomflow::alignment::{hungarian, CostMatrix};
use geomflow::geometry::Permutation;

fn main() -> geomflow::Result<()> {
    let c = CostMatrix::new(4, vec![
        4.0, 1.0, 3.0, 2.0, //
        2.0, 0.0, 5.0, 3.0, //
        3.0, 2.0, 2.0, 1.0, //
        1.0, 4.0, 3.0, 0.5,
    ])?;
    let p = hungarian(&c);
    println!("column j matched to row {:?}, cost {}", p.as_slice(), c.assignment_cost(&p));

    let mut best = f64::INFINITY;
    let mut perm = vec![0, 1, 2, 3];
    permute(&mut perm, 0, &mut |q| best = best.min(c.assignment_cost(&Permutation::new(q.to_vec()).unwrap())));
    println!("enumeration optimum {best}");
    Ok(())
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}
