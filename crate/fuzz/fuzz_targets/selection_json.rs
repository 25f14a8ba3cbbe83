#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::select::Selection;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<Selection>(data);
});
