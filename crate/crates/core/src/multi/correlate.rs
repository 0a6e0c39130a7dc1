use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{Frame, Meta, NodeId, Profile, ROLE_SELF};

/// Points linked to one anchor context, projected onto a follow-on role.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub anchor: NodeId,
    pub from: String,
    pub to: String,
    /// Indices into the source profile's points.
    pub points: Vec<usize>,
    /// Sub-profile holding the `to` contexts of the selected points.
    pub projection: Profile,
}

/// Every distinct node that appears under `role` in some point.
pub fn anchors(profile: &Profile, role: &str) -> Result<Vec<NodeId>> {
    check_role(profile, role)?;
    let set: BTreeSet<NodeId> = profile
        .points()
        .iter()
        .flat_map(|p| p.context(role))
        .collect();
    Ok(set.into_iter().collect())
}

/// Projects the points whose `from` context is `anchor` onto their `to` contexts.
pub fn correlate(profile: &Profile, anchor: NodeId, from: &str, to: &str) -> Result<Correlation> {
    if profile.get_node(anchor).is_none() {
        return Err(Error::UnknownNode(anchor.index()));
    }
    check_role(profile, from)?;
    check_role(profile, to)?;
    let points: Vec<usize> = profile
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.context(from).any(|n| n == anchor))
        .map(|(i, _)| i)
        .collect();
    let projection = project(profile, &points, to, &format!("{from}->{to}"))?;
    Ok(Correlation {
        anchor,
        from: from.to_string(),
        to: to.to_string(),
        points,
        projection,
    })
}

/// Projects every point carrying `role` onto that role's contexts.
pub fn project_role(profile: &Profile, role: &str) -> Result<Profile> {
    check_role(profile, role)?;
    let points: Vec<usize> = (0..profile.points().len()).collect();
    project(profile, &points, role, role)
}

fn check_role(profile: &Profile, role: &str) -> Result<()> {
    if profile
        .points()
        .iter()
        .any(|p| p.context(role).next().is_some())
    {
        Ok(())
    } else {
        Err(Error::UnknownRole(role.to_string()))
    }
}

fn project(profile: &Profile, points: &[usize], role: &str, suffix: &str) -> Result<Profile> {
    let src = profile.meta();
    let meta = Meta {
        name: if src.name.is_empty() {
            suffix.to_string()
        } else {
            format!("{} [{suffix}]", src.name)
        },
        ..src.clone()
    };
    let mut out = Profile::new(meta, profile.metrics().to_vec())?;
    for &i in points {
        let point = &profile.points()[i];
        for node in point.context(role) {
            let stack: Vec<Frame> = profile.path_frames(node).into_iter().cloned().collect();
            if stack.is_empty() {
                continue;
            }
            out.add_point(&[(ROLE_SELF, &stack)], &point.values)?;
        }
    }
    Ok(out)
}
