use std::sync::OnceLock;

use crate::isa_model::BackendConfig;
use crate::sail_syntax::{collect_sail_files, parse_corpus, parse_sources, SailModel};

pub(crate) fn bundled() -> &'static SailModel {
    static MODEL: OnceLock<SailModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let files = collect_sail_files(&[crate::bundled_corpus_dir()]).unwrap();
        parse_corpus(&files).unwrap()
    })
}

pub(crate) fn riscv() -> &'static BackendConfig {
    static CFG: OnceLock<BackendConfig> = OnceLock::new();
    CFG.get_or_init(BackendConfig::riscv)
}

pub(crate) fn model(src: &str) -> SailModel {
    parse_sources(&[("t.sail".to_string(), src.to_string())]).unwrap()
}
