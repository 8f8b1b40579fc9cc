import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from ood_harness.corpus import Corpus, Instance, TaskSpec


def make_task(labels=("pro", "con"), shift_kind="topic", pairwise=False, name="toy"):
    return TaskSpec(name=name, shift_kind=shift_kind, label_set=tuple(labels), pairwise=pairwise)


def make_corpus(layout, task=None, text="a word."):
    """Build a corpus from {group: [label, ...]} with generated ids."""
    task = task or make_task()
    instances = []
    for group, labels in layout.items():
        for i, label in enumerate(labels):
            instances.append(
                Instance(
                    id=f"{group}-{i}",
                    text=text,
                    label=label,
                    groups={task.shift_kind: group},
                )
            )
    return Corpus(task=task, instances=tuple(instances))
