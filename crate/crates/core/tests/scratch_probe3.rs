use trapkit_core::desk;
use trapkit_core::trap::{find_well, WellOptions};
use trapkit_core::waveform::{solve_static, HardwareLimits, SynthOptions, ZoneObjective};

#[test]
fn probe_static_solve() {
    let layout = desk::default_layout();
    let limits = HardwareLimits::default();
    let omega0 = 2.0 * std::f64::consts::PI * 1.9e6;
    let opts = SynthOptions { audit: false, ..SynthOptions::default() };

    // Single zone well
    let t0 = std::time::Instant::now();
    let v = solve_static(&layout, &[ZoneObjective::well("zone1", omega0)], &limits, &opts).unwrap();
    println!("solve took {:?}", t0.elapsed());
    println!("voltages: {:?}", v.iter().map(|x| (x*1e3).round()/1e3).collect::<Vec<_>>());
    let well = find_well(&layout, &v, desk::zone1_x(), &WellOptions::default()).unwrap();
    println!("well: x = {:+.6e} (target {:+.6e}), dx = {:.3e} m", well.position.x, desk::zone1_x(), (well.position.x - desk::zone1_x()).abs());
    println!("freq: {:.6} MHz vs 1.9 target, rel err {:.3e}", well.axial_frequency/(2.0*std::f64::consts::PI*1e6), (well.axial_frequency-omega0).abs()/omega0);
    println!("residual field: {:?}", well.residual_field);
    println!("radial angle: {:.4e} rad", well.radial_mode_angle);

    // Both zones, mirror symmetry
    let omega1 = 2.0 * std::f64::consts::PI * 1.0e6;
    let v2 = solve_static(&layout, &[ZoneObjective::well("zone1", omega1), ZoneObjective::well("zone2", omega1)], &limits, &opts).unwrap();
    let n = v2.len();
    // mirror: dct_i <-> dct_{9-i}; layout order: dct1, dcb1, dct2, dcb2, ...
    let mut max_asym = 0.0f64;
    for i in 0..10 {
        for tb in 0..2 {
            let a = v2[2*i + tb];
            let b = v2[2*(9-i) + tb];
            max_asym = max_asym.max((a-b).abs());
        }
    }
    println!("n = {n}, mirror asymmetry: {:.3e} V", max_asym);

    // Zone-2 field with zone-1 null
    let v3 = solve_static(&layout, &[
        ZoneObjective::well("zone1", omega0),
        ZoneObjective::well("zone2", omega0).with_axial_field(100.0),
    ], &limits, &opts).unwrap();
    let w1 = find_well(&layout, &v3, desk::zone1_x(), &WellOptions::default()).unwrap();
    let w2 = find_well(&layout, &v3, desk::zone2_x(), &WellOptions::default()).unwrap();
    let base = solve_static(&layout, &[
        ZoneObjective::well("zone1", omega0),
        ZoneObjective::well("zone2", omega0),
    ], &limits, &opts).unwrap();
    let b1 = find_well(&layout, &base, desk::zone1_x(), &WellOptions::default()).unwrap();
    let b2 = find_well(&layout, &base, desk::zone2_x(), &WellOptions::default()).unwrap();
    println!("zone2 displacement: {:.4e} m, zone1 displacement: {:.4e} m, ratio {:.4e}",
        (w2.position.x - b2.position.x).abs(), (w1.position.x - b1.position.x).abs(),
        (w1.position.x - b1.position.x).abs() / (w2.position.x - b2.position.x).abs());
}
