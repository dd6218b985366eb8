class ExplanationDAG:

  def __init__(self):
    belief = "factory farming should not be banned."
    argument = "Factory farming feeds millions."
    stance = "support"

    # Edges
    begin = ["factory farming", "millions"]
    add_edge("factory farming", "causes", "food")
    add_edge("factory farming", "has context", "necessary")
    add_edge("food", "has context", "necessary")
    add_edge("necessary", "not desires", "banned")
    add_edge("millions", "desires", "food")
