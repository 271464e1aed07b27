#![no_main]

use libfuzzer_sys::fuzz_target;
use mtgnn::gnn::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ck) = Checkpoint::from_json(text) {
            let _ = ck.to_model();
        }
    }
});
