use serde::{Deserialize, Serialize};

use super::CloudError;

/// Hardware preset of a purchasable instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub name: String,
    pub vcpu: u32,
    pub ecu_total: f64,
    /// Authoritative per-core performance; task durations are derived from it.
    pub ecu_per_core: f64,
    /// USD per hour.
    pub on_demand_price: f64,
}

impl InstanceType {
    /// Builds a type with `ecu_total = vcpu * ecu_per_core`.
    pub fn new(name: &str, vcpu: u32, ecu_per_core: f64, on_demand_price: f64) -> Self {
        InstanceType {
            name: name.to_string(),
            vcpu,
            ecu_total: f64::from(vcpu) * ecu_per_core,
            ecu_per_core,
            on_demand_price,
        }
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        let bad = |why: &str| Err(CloudError::InvalidInstanceType(format!("{}: {why}", self.name)));
        if self.name.is_empty() {
            return bad("empty name");
        }
        if self.vcpu == 0 {
            return bad("vcpu must be positive");
        }
        if !(self.ecu_per_core.is_finite() && self.ecu_per_core > 0.0) {
            return bad("ecu_per_core must be positive");
        }
        if !(self.ecu_total.is_finite() && self.ecu_total > 0.0) {
            return bad("ecu_total must be positive");
        }
        if !(self.on_demand_price.is_finite() && self.on_demand_price > 0.0) {
            return bad("on_demand_price must be positive");
        }
        let derived = self.ecu_total / f64::from(self.vcpu);
        if (derived - self.ecu_per_core).abs() > 1e-9 * self.ecu_per_core.max(1.0) {
            return bad("ecu_per_core does not match ecu_total / vcpu");
        }
        Ok(())
    }
}

/// The five on-demand types of the US-west (Oregon) experiments.
///
/// m3.medium is listed with 3 total ECU but 2 ECU per core on its single
/// vCPU; the per-core figure is kept and the total derived from it.
pub fn default_catalog() -> Vec<InstanceType> {
    vec![
        InstanceType::new("t2.micro", 1, 1.0, 0.013),
        InstanceType::new("m3.medium", 1, 2.0, 0.07),
        InstanceType::new("c3.2xlarge", 8, 3.5, 0.42),
        InstanceType::new("r3.xlarge", 4, 3.25, 0.35),
        InstanceType::new("m3.2xlarge", 8, 3.25, 0.56),
    ]
}

pub fn find<'a>(catalog: &'a [InstanceType], name: &str) -> Option<&'a InstanceType> {
    catalog.iter().find(|t| t.name == name)
}

/// Parses a catalog file: a JSON array of instance types.
pub fn load_catalog(text: &str) -> Result<Vec<InstanceType>, CloudError> {
    let catalog: Vec<InstanceType> =
        serde_json::from_str(text).map_err(|e| CloudError::Parse(e.to_string()))?;
    if catalog.is_empty() {
        return Err(CloudError::InvalidInstanceType("catalog is empty".into()));
    }
    for (i, t) in catalog.iter().enumerate() {
        t.validate()?;
        if catalog[..i].iter().any(|o| o.name == t.name) {
            return Err(CloudError::InvalidInstanceType(format!(
                "{}: duplicate name",
                t.name
            )));
        }
    }
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_is_valid() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 5);
        for t in &cat {
            t.validate().unwrap();
        }
        let c3 = find(&cat, "c3.2xlarge").unwrap();
        assert_eq!((c3.vcpu, c3.ecu_total, c3.on_demand_price), (8, 28.0, 0.42));
        let m3 = find(&cat, "m3.2xlarge").unwrap();
        assert_eq!((m3.vcpu, m3.ecu_total, m3.on_demand_price), (8, 26.0, 0.56));
        assert_eq!(find(&cat, "r3.xlarge").unwrap().ecu_total, 13.0);
    }

    #[test]
    fn catalog_file_round_trip() {
        let text = serde_json::to_string(&default_catalog()).unwrap();
        assert_eq!(load_catalog(&text).unwrap(), default_catalog());
    }

    #[test]
    fn rejects_inconsistent_ecu() {
        let text = r#"[{"name":"x","vcpu":2,"ecu_total":5,"ecu_per_core":2,"on_demand_price":0.1}]"#;
        assert!(load_catalog(text).is_err());
        let text = r#"[{"name":"x","vcpu":2,"ecu_total":4,"ecu_per_core":2,"on_demand_price":0}]"#;
        assert!(load_catalog(text).is_err());
    }
}
