use nalgebra::Vector3;
use trapkit_core::desk;
use trapkit_core::trap::{electrode_basis, find_well, WellOptions};

#[test]
fn probe_scales() {
    let layout = desk::default_layout();
    let q = layout.ion_charge();
    let m = layout.ion_mass();
    let omega0 = 2.0 * std::f64::consts::PI * 1.9e6;
    let c_target = m * omega0 * omega0 / q;
    println!("target curvature for 1.9 MHz: {:.4e} V/m^2", c_target);

    // curvature per volt of each DC electrode at zone1
    let p = layout.axis_point(desk::zone1_x());
    let basis = electrode_basis(&layout, &[p]).unwrap();
    for (i, name) in basis.electrode_names().iter().enumerate() {
        let s = basis.sample(0, i);
        if name.starts_with("dc") {
            println!("{name}: phi={:+.3e} dphix={:+.3e} d2phixx={:+.3e}", s.phi, s.grad.x, s.hess[(0,0)]);
        }
    }
    // window basis at zone1 center and nearby
    for dx in [-50e-6f64, -24e-6, 0.0, 24e-6, 50e-6] {
        let p = layout.axis_point(desk::zone1_x() + dx);
        let basis = electrode_basis(&layout, &[p]).unwrap();
        let mut row = format!("x=zc{:+.0}um:", dx*1e6);
        for (i, name) in basis.electrode_names().iter().enumerate() {
            if name.starts_with("z1_w") {
                let s = basis.sample(0, i);
                row += &format!(" {}: phi={:+.4e} hxx={:+.3e}", name, s.phi, s.hess[(0,0)]);
            }
        }
        println!("{row}");
    }

    // five-electrode well
    let five = desk::five_electrode_layout();
    let v = [1.0, 1.0, -1.0, 1.0, 1.0];
    let well = find_well(&five, &v, 10e-6, &WellOptions::default()).unwrap();
    println!("five-electrode well: x={:.4e} m, f={:.4} MHz, field={:?}",
        well.position.x, well.axial_frequency / (2.0*std::f64::consts::PI*1e6), well.residual_field);
    println!("well position full: {:?}", well.position);
    println!("radial angle: {:.4} rad", well.radial_mode_angle);
    let _ = Vector3::<f64>::zeros();
}
