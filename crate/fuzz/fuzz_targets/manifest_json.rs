#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::pipeline::Manifest;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<Manifest>(data);
});
