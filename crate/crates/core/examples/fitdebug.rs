use pme_core::mesh1d::best_fit_mesh;
use pme_core::model::BarenblattParams;

fn main() {
    let p = BarenblattParams::new(5.0, 1, 1.0).unwrap();
    let r = p.support_radius(1.0);
    for n in [12usize, 24, 48, 96] {
        let fit = best_fit_mesh(|x| p.value(&[x], 1.0), (-r, r), n, 200, 1e-10).unwrap();
        let h_edge = fit.mesh.knots[1] - fit.mesh.knots[0];
        let h_min = (0..n).map(|i| fit.mesh.knots[i+1]-fit.mesh.knots[i]).fold(f64::INFINITY, f64::min);
        println!("N={n:3} err={:.4e} h_edge={:.3e} h_min={:.3e} iters={} conv={}",
                 fit.l2_error, h_edge, h_min, fit.iterations, fit.converged);
    }
}
