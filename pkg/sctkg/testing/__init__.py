"""
Module to help with testing.
"""

import json
import os


# cases live in json files next to the tests that use them, as
# [{"operation": ..., "name": ..., "input": ..., "expected": ...}, ...]
def load_test_cases(file_name: str) -> tuple:
    """Load test cases from a json file."""
    with open(file_name, "r", encoding="utf-8") as f:
        json_test_cases = json.load(f)
        test_cases = [(tc.get("input"), tc.get("expected")) for tc in json_test_cases]
        test_ids = [
            f"{tc.get('operation', 'OPERATION_MISSING')}-{tc.get('name', 'NAME_MISSING')}"
            for tc in json_test_cases
        ]
    return test_cases, test_ids


# Define the pytest_generate_tests hook to generate test cases dynamically based on the
# contents of a file
def pytest_generate_tests(metafunc):
    """Parametrizes tests taking ``case_input`` and ``case_expected`` from the files named in
    their ``file_name`` marker. Relative names resolve against the test module's directory.

    Use this with PyTest.
    """
    if "case_input" in metafunc.fixturenames and "case_expected" in metafunc.fixturenames:
        base_dir = os.path.dirname(str(metafunc.module.__file__))
        file_names = [
            file_arg if os.path.isabs(file_arg) else os.path.join(base_dir, file_arg)
            for m in metafunc.definition.own_markers
            if m.name == "file_name"
            for file_arg in m.args
        ]
        all_test_cases = []
        all_test_ids = []
        for file_name in file_names:
            test_cases, test_case_ids = load_test_cases(file_name)
            all_test_cases.extend(test_cases)
            all_test_ids.extend(test_case_ids)
        if not all_test_cases:
            raise ValueError(
                f"No test cases could be created for test {metafunc.definition.originalname}."
            )
        metafunc.parametrize("case_input,case_expected", all_test_cases, ids=all_test_ids)
