class Plan:

  goal = "create a video game"
  num_steps = 7

  def __init__(self):
    graph = nx.DiGraph()
    # add nodes
    step0 = "decided to create a video game"
    step1 = "Learn the basics of programming"
    step2 = "Learn to use a language that is used in games"
    step3 = "Learn to use an existing game engine"
    step4 = "Program the game"
    step5 = "Test the game"
    step6 = "create a video game"
    graph.add_nodes_from([step0, step1, step2, step3, step4, step5, step6])

    # add edges
    graph.add_edge(step0, step1)
    graph.add_edge(step1, step2)
    graph.add_edge(step1, step3)
    graph.add_edge(step2, step4)
    graph.add_edge(step3, step4)
    graph.add_edge(step4, step5)
    graph.add_edge(step5, step6)
