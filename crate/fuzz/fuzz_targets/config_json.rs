#![no_main]

use libfuzzer_sys::fuzz_target;
use feclust::pipeline::PipelineConfig;

// First line: a `key=value` override; the rest: the config document.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let (first, rest) = text.split_once('\n').unwrap_or(("", text));
        if let Ok(mut cfg) = PipelineConfig::from_json(rest) {
            let _ = cfg.set(first);
            let _ = cfg.effective().validate();
        }
    }
});
