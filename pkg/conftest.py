# Keeps the project root importable (`modules.*`) when pytest runs from anywhere.
