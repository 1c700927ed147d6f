//! Shared fixtures for the benchmark suite.

use extenso_core::diffcalc::DomainBox;
use extenso_core::extensivity::SampleSpec;
use extenso_core::models::ThermoSystem;

pub fn gas() -> ThermoSystem {
    ThermoSystem::ideal_gas(1.5, std::f64::consts::E, 1.0).unwrap()
}

pub fn unit_box_spec(count: usize) -> SampleSpec {
    let cube = DomainBox::new(vec![1.0; 3], vec![1.4; 3]).unwrap();
    SampleSpec::new(cube, count, 0xBE7)
}
