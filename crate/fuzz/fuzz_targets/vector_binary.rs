#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::embed::decode_binary;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = decode_binary(data) {
        assert_eq!(v.data.len(), v.n * v.dim);
    }
});
