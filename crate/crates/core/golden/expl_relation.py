class Relation:

  def __init__(self):
    belief = "Cannabis should be legal."
    argument = "It's not a bad thing to make marijuana more available."
    stance = "support"

    # create a DAG to support belief using argument
    begin = ["cannabis"]
    add_edge("cannabis", "synonym of", "marijuana")
    add_edge("legal", "causes", "more available")
    add_edge("marijuana", "capable of", "good thing")
    add_edge("good thing", "desires", "legal")
