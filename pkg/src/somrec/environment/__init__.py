from .agent import (
    Action,
    ActionSpaceError,
    AgentState,
    JumpToPose,
    MoveForward,
    Orient,
    OrientToFace,
    TranslateTangential,
    apply_action,
    look_at,
)
from .scene import (
    Hit,
    ObjectInstance,
    Painter,
    Part,
    Patch,
    Scene,
    SceneObject,
    load_scene,
    ray_cast,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    sense_patch,
)
from .shapes import (
    Box,
    CappedTorus,
    Capsule,
    Cylinder,
    Mesh,
    OffSurfaceError,
    Sphere,
    SurfaceProperties,
    Torus,
    UnsupportedShapeError,
    load_obj,
    shape_from_dict,
)

__all__ = [name for name in dir() if not name.startswith("_")]
