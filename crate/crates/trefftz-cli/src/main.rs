use trefftz::bie::{boundary_functional, normal_derivative, C64, ConjugateSolver};
use trefftz::geometry::{
    all_edge_grids, boundary_grid, mesh_generate, Family, FamilyParams, KressParams,
};

fn main() {
    let t0 = std::time::Instant::now();
    for (fam, name, last) in [
        (Family::Square, "square", 0usize),
        (Family::Lshape, "lshape", 0usize),
        (Family::Pegboard, "washer", 0usize),
        (Family::Pegboard, "bigon", 2usize),
    ] {
        let mesh = mesh_generate(fam, 1, &FamilyParams::default()).unwrap();
        let cell = mesh.cells.len() - 1 - last;
        let grids = all_edge_grids(&mesh, KressParams { n_per_edge: 64, q: 7 });
        let grid = boundary_grid(&mesh, cell, &grids);
        let solver = ConjugateSolver::new(&grid).unwrap();
        let c = grid.centroid;
        let per: f64 = grid.weight.iter().sum();
        let mut worst = (0u32, 0.0f64, 0.0f64, 0.0f64);
        for k in 1..=6u32 {
            let g_dt: Vec<f64> = (0..grid.n_nodes)
                .map(|j| {
                    let p = grid.x[j];
                    let fp = C64::new(p.x - c.x, p.y - c.y).powu(k - 1) * k as f64;
                    (fp * C64::new(grid.tangent[j].x, grid.tangent[j].y)).re
                })
                .collect();
            let v = solver.solve(&g_dt);
            let vex: Vec<f64> = grid
                .x
                .iter()
                .map(|&p| C64::new(p.x - c.x, p.y - c.y).powu(k).im)
                .collect();
            let mean = boundary_functional(&grid, &vex) / per;
            let err = v
                .iter()
                .zip(&vex)
                .map(|(&a, &b)| (a - (b - mean)).abs())
                .fold(0.0f64, f64::max);
            let flux = boundary_functional(&grid, &normal_derivative(&grid, &v)).abs();
            let vmean = solver.boundary_mean(&v).abs();
            if err > worst.1 {
                worst = (k, err, flux, vmean);
            }
            println!("{name} k={k}: err {err:.2e} flux {flux:.2e} vmean {vmean:.2e}");
        }
        println!(
            "{name}: WORST k={} err {:.2e} flux {:.2e} vmean {:.2e}",
            worst.0, worst.1, worst.2, worst.3
        );
    }
    println!("elapsed {:?}", t0.elapsed());
}
