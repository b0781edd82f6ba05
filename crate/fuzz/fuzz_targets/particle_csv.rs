#![no_main]

use bohm_core::sampler::ParticleSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = ParticleSet::read_csv(data) {
        assert_eq!(set.points.len(), set.tags.len());
        assert!(set.points.iter().all(|p| p.is_finite()));
    }
});
