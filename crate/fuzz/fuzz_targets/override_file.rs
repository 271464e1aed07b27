#![no_main]

use libfuzzer_sys::fuzz_target;
use mtgnn::data::{apply_override, parse_override};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(buckets) = parse_override(text) {
            let groups = vec![buckets.iter().flatten().cloned().collect::<Vec<_>>()];
            let _ = apply_override(&groups, &buckets);
        }
    }
});
