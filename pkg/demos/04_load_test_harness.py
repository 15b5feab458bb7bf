"""Spin up the gateway, replay the scripted dialogue with concurrent
simulated users over the wire protocol, and print the latency table.

Run: python3 demos/04_load_test_harness.py [users]
"""

import sys
import threading
import time

import uvicorn

from parley.demo import data_path, load_profile
from parley.harness import SimConfig, load_suite, render_summary, run_simulation, summarize
from parley.server import create_app

users = int(sys.argv[1]) if len(sys.argv) > 1 else 4
port = 8902

server = uvicorn.Server(
    uvicorn.Config(create_app(load_profile()), host="127.0.0.1", port=port, log_level="error")
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.02)

suite = load_suite(data_path("suites", "d1.json"))
config = SimConfig(endpoint=f"ws://127.0.0.1:{port}/ws", users=users, max_wait_s=30.0)
report = run_simulation(suite, config)

print(f"users={users} passed={report.passed} records={len(report.records)} "
      f"leaks={report.leaked_frames} wall={report.wall_time_s:.2f}s\n")
print(render_summary(summarize(report)))
print("\nutterances observed per group:", report.utterances_per_group)

server.should_exit = True
thread.join(timeout=5)
