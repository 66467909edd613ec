use nalgebra::Vector3;
use trapkit_core::desk;

#[test]
fn probe_vertical() {
    let five = desk::five_electrode_layout();
    let v = [1.0, 1.0, -1.0, 1.0, 1.0];
    for zum in [10.0f64, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0, 150.0] {
        let p = Vector3::new(0.0, 0.0, zum * 1e-6);
        let (g, h) = five.total_grad_hess(&v, &p).unwrap();
        let pot = five.total_potential(&v, &p).unwrap();
        println!("z={zum:>5} um: pot={pot:+.5e} gz={:+.5e} hzz={:+.4e} hxx={:+.4e}", g.z, h[(2,2)], h[(0,0)]);
    }
}
