"""The three built-in experts installed by ``medagi seed``."""

from __future__ import annotations

from datetime import datetime, timezone

from medagi.registry import ExpertDescriptor, Registry

SKINGPT4_DESCRIPTION = (
    "SkinGPT is a revolutionary dermatology diagnostic system that utilizes an advanced "
    "vision-based large language model to assess skin conditions. By uploading personal skin "
    "photos to the system, users receive an autonomous analysis that can identify and "
    "categorize various skin conditions, and provide treatment recommendations."
)

XRAYCHAT_DESCRIPTION = (
    "XrayChat is a cutting-edge system that enables interactive, multi-turn conversations "
    "about chest X-ray images. Users simply upload a chest X-ray image, ask any question about "
    "it, and XrayChat generates informed responses. The system utilizes an X-ray encoder, a "
    "large language model, and an adaptor to comprehend the X-ray image and produce accurate "
    "and helpful answers."
)

PATHOLOGYCHAT_DESCRIPTION = (
    "PathologyChat is a cutting-edge system that enables interactive, multi-round "
    "conversations about stained pathology images. Users simply upload a pathology image, ask "
    "any question about it, and PathologyChat generates informed responses."
)

# fixed timestamp keeps seeded registry files byte-stable
SEED_CREATED_AT = datetime(2023, 6, 1, tzinfo=timezone.utc)


def seed_descriptors() -> list[ExpertDescriptor]:
    return [
        ExpertDescriptor(
            id="skingpt4",
            display_name="SkinGPT-4",
            description=SKINGPT4_DESCRIPTION,
            adapter_ref="adapter://skingpt4/alignment-layer",
            tags=("dermatology",),
            created_at=SEED_CREATED_AT,
        ),
        ExpertDescriptor(
            id="xraychat",
            display_name="XrayChat",
            description=XRAYCHAT_DESCRIPTION,
            adapter_ref="adapter://xraychat/alignment-layer",
            tags=("radiology", "chest-x-ray"),
            created_at=SEED_CREATED_AT,
        ),
        ExpertDescriptor(
            id="pathologychat",
            display_name="PathologyChat",
            description=PATHOLOGYCHAT_DESCRIPTION,
            adapter_ref="adapter://pathologychat/alignment-layer",
            tags=("pathology",),
            created_at=SEED_CREATED_AT,
        ),
    ]


def seed_registry(registry: Registry) -> list[str]:
    """Register every seed expert not already present; returns the ids added."""
    added = []
    present = set(registry.snapshot.ids)
    for d in seed_descriptors():
        if d.id not in present:
            registry.register(d)
            added.append(d.id)
    return added
