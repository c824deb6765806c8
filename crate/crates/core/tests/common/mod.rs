#![allow(dead_code)]

use gllab_core::domain::{Domain, DomainSpec};
use gllab_core::gauge::{external_potential, ExternalField, FieldProfile, GaugeData};
use gllab_core::spectra::{assemble, ground_state, Spectrum};

pub struct Scenario {
    pub d: Domain,
    pub field: ExternalField,
    pub g: GaugeData,
}

impl Scenario {
    pub fn new(spec: DomainSpec, profile: FieldProfile) -> Self {
        let d = Domain::build(&spec).unwrap();
        let field = ExternalField::sample(&profile, &d).unwrap();
        let g = external_potential(&field, &d).unwrap();
        Self { d, field, g }
    }

    pub fn spectrum(&self) -> Spectrum {
        ground_state(&assemble(&self.g, &self.d), &self.d, 2).unwrap()
    }
}

/// Disk of radius 1 with an off-center hole carrying half a flux quantum.
pub fn half_flux(n: usize) -> Scenario {
    Scenario::new(
        DomainSpec::disk_with_hole(1.0, [0.2, 0.1], 0.3, n),
        FieldProfile::UniformInHole { fluxes: vec![0.5] },
    )
}

/// Unit disk in a uniform unit field.
pub fn uniform_disk(n: usize) -> Scenario {
    Scenario::new(
        DomainSpec::disk([0.0, 0.0], 1.0, n),
        FieldProfile::UniformEverywhere { strength: 1.0 },
    )
}
