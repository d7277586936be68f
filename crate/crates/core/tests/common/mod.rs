#![allow(dead_code)]

use std::path::PathBuf;

use netauction::io::load_instance;
use netauction::mechanism::AnyInstance;
use netauction::model::{AgentId, ForwardInstance, HetInstance, HomInstance, Labels};

pub fn fixture(name: &str) -> AnyInstance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_instance(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn hom(name: &str) -> HomInstance {
    match fixture(name) {
        AnyInstance::Hom(i) => i,
        other => panic!("{name} is {}", other.variant()),
    }
}

pub fn het(name: &str) -> HetInstance {
    match fixture(name) {
        AnyInstance::Het(i) => i,
        other => panic!("{name} is {}", other.variant()),
    }
}

pub fn forward(name: &str) -> ForwardInstance {
    match fixture(name) {
        AnyInstance::Forward(i) => i,
        other => panic!("{name} is {}", other.variant()),
    }
}

pub fn id(labels: &Labels, name: &str) -> AgentId {
    labels.agent_by_name(name).unwrap_or_else(|| panic!("no agent {name}"))
}
