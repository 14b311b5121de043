//! Build a store, save it atomically, reload it and look passwords up.

use std::sync::Arc;

use gridpass::store::Selector;
use gridpass::{default_charset, CredentialRecord, CredentialStore, StoreMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cs = Arc::new(default_charset());
    let mut store = CredentialStore::new(Arc::clone(&cs), StoreMode::UsernameScoped);
    store.add(CredentialRecord::scoped("alice", "Lagos(2006)"))?;
    store.add(CredentialRecord::scoped("bob", "x9{y}"))?;
    store.add(CredentialRecord::scoped("carol", "Abc"))?;

    if let Err(e) = store.add(CredentialRecord::scoped("dave", "has space")) {
        println!("rejected: {e}");
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("users.db");
    store.save(&path)?;
    println!("{}", std::fs::read_to_string(&path)?);

    let mut loaded = CredentialStore::load(&path)?;
    assert_eq!(loaded.to_text(), store.to_text());
    println!("alice -> {:?}", loaded.find_user("alice").map(|r| r.password.as_str()));
    loaded.remove(&Selector::Username("bob".into()))?;
    println!("after removing bob: {} records", loaded.len());
    Ok(())
}
