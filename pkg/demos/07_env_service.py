# The RVNP1 wire protocol: drive an episode over a raw socket.

import json
import socket

from rvnsim import EpisodeConfig, build_scenarios
from rvnsim.envserver import start_server
from rvnsim.world import SceneParams

scenarios = build_scenarios([61], "TRAIN",
                            episode_config=EpisodeConfig(n_goal=1),
                            scene_params=SceneParams(width_m=12.0, height_m=12.0))
server = start_server("127.0.0.1:0", scenarios)
print("serving on", server.address)

sock = socket.create_connection(server.server_address[:2])
wire = sock.makefile("rw", encoding="utf-8", newline="\n")


def rpc(**payload):
    wire.write(json.dumps(payload) + "\n")
    wire.flush()
    return json.loads(wire.readline())


hello = rpc(id=1, cmd="hello")
print("hello ->", hello)

first = rpc(id=2, cmd="reset")
print(f"reset -> scene {first['scene_id']}, goal {first['goal']}")

for i, action in enumerate(["TURN_LEFT", "MOVE_FORWARD", "MOVE_FORWARD", "STOP"]):
    reply = rpc(id=3 + i, cmd="step", action=action)
    print(f"{action:12s} reward={reply['reward']:+.3f} cost={reply['cost']:.1f} "
          f"done={reply['done']} dtg={reply['info']['dtg']:.2f}")

print("malformed ->", json.loads((wire.write("oops\n"), wire.flush(),
                                  wire.readline())[2]))
sock.close()
server.shutdown()
server.server_close()
