#![no_main]

use bohm_core::integrate::read_trajectory_binary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_trajectory_binary(data) {
        assert_eq!(data.len(), 16 + 24 * points.len());
    }
});
