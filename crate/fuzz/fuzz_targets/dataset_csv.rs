#![no_main]

use libfuzzer_sys::fuzz_target;
use mtgnn::data::{merge_tasks, parse_dataset};

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = parse_dataset(data, "fuzz") {
        assert!(!d.is_empty());
        let _ = merge_tasks(&[d]);
    }
});
