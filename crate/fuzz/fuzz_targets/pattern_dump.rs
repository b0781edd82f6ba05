#![no_main]

use bohm_core::pattern::{read_dump, read_dump_csv, write_dump};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((grid, note)) = read_dump(data) {
        let mut out = Vec::new();
        write_dump(&grid, note.as_deref(), &mut out).unwrap();
        let (back, _) = read_dump(out.as_slice()).expect("rewritten dump decodes");
        assert_eq!(back.counts, grid.counts);
    }
    let _ = read_dump_csv(data);
});
