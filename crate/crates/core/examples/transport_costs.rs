//! Cost of an independent noise/data coupling, before and after per-pair
//! alignment, in data space.

use geomflow::costs::{distribution_cost_of, CostReport, CostSpace, OmtMode};
use geomflow::data::{make_dataset, TemplateSpec};
use geomflow::geometry::{project_zero_com, Geometry, PointSet};
use geomflow::flow::sample_noise;

fn main() -> geomflow::Result<()> {
    let data = make_dataset(&TemplateSpec::default(), 200)?;
    let targets: Vec<Geometry> = data.iter().map(project_zero_com).collect();
    let noise: Vec<Geometry> = targets
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let z = sample_noise(g.n(), g.feature_dim(), i as u64);
            Geometry::new(z.coords().to_vec(), z.features().to_vec(), None)
        })
        .collect::<geomflow::Result<_>>()?;
    let pairs: Vec<(&Geometry, &Geometry)> = noise.iter().zip(&targets).collect();

    println!("mode,{}", CostReport::CSV_HEADER);
    for (name, mode) in [("single-pass", OmtMode::Heuristic { max_iters: 1 }), ("alternating", OmtMode::Heuristic { max_iters: 50 })] {
        let r = distribution_cost_of(&pairs, 0.5, mode, CostSpace::Data)?;
        println!("{name},{}", r.csv_row());
    }
    Ok(())
}
