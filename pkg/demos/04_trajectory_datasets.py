# Expert and negative trajectory records: generation, disk format, replay.

import tempfile

from rvnsim import generate_scene, load_record, replay_record, save_record
from rvnsim.datagen import PlannerConfig, PlannerContext, generate_expert, generate_negative
from rvnsim.world import SceneParams

scene = generate_scene(21, SceneParams(width_m=12.0, height_m=12.0))
config = PlannerConfig()  # expert margin 0.23 m, negative margin 0.10 m
ctx = PlannerContext(scene, config)

expert = generate_expert(scene, config, seed=100, ctx=ctx)
print(f"expert: {len(expert.frames)} frames, path {expert.path_length_m:.2f} m, "
      f"collision_index={expert.collision_index}")

negative = generate_negative(scene, config, seed=200, ctx=ctx)
ci = negative.collision_index
print(f"negative: {len(negative.frames)} frames, collision at index {ci} "
      f"({ci} pre + 1 + {config.k_post} frozen)")
frozen = negative.frames[ci + 1]
print("post-collision frame is byte-frozen:",
      frozen.obs.packed_bytes() == negative.frames[ci].obs.packed_bytes())

with tempfile.TemporaryDirectory() as root:
    where = save_record(expert, root)
    print("saved:", sorted(p.name for p in where.iterdir()))
    back = load_record(where)
    problems = replay_record(back, scene)
    print("replay violations:", problems or "none")
    manifest = (where / "manifest.json").read_text()
    print("manifest head:", manifest[:120], "...")
